"""Motion-intention recognition lab: sEMG CNN-LSTM and toy video Swin from scratch."""

__version__ = "0.1.0"
