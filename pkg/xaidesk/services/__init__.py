"""Explainer, training, report and oracle services."""
