"""12-lead ECG super-resolution (50 Hz -> 500 Hz) with a denoising convolutional autoencoder."""

__version__ = "0.1.0"
