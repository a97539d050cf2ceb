# BG Deconvolution Django Settings Package
