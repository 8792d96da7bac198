"""
Django app housing latent vector recovery for raw-waveform audio GANs.
"""

__version__ = '0.1.0'
