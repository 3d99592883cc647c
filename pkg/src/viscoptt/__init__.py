"""Cuffless blood-pressure estimation from ECG and PPG with a viscoelastic
EEMD feature and a Random Forest regressor."""

__version__ = "0.1.0"
