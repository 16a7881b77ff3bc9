"""Image IO, validation and digest helpers."""
