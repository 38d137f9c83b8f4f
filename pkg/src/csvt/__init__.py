"""Classical simulation of channel block-encodings, QSVT and singular-value moment estimators."""

__version__ = "0.1.0"
