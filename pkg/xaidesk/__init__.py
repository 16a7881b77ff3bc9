"""Desk-scale explainable-AI engine: LIME, SHAP, Grad-CAM and guided backpropagation on a toy CNN."""

__version__ = "0.1.0"
