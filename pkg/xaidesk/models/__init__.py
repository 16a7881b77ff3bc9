"""Network, dataset and weight-file modules."""
