# BG Deconvolution Django project
