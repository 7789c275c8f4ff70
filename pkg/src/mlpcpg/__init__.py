"""MLP-CPG locomotion: a stateless Hopf oscillator network driven by a feedback MLP."""

__version__ = "0.1.0"
