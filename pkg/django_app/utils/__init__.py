# BG Deconvolution file formats and validators
