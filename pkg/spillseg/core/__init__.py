"""Tensors, differentiable operators and gradient verification."""
