# BG Deconvolution experiment services
