"""Core numerics: random stream, tensors, reverse-mode differentiation."""
