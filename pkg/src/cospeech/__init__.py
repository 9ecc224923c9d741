"""Co-speech facial animation with latent diffusion."""
__version__ = "0.1.0"
