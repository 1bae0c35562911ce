"""Domain layer (losses, metrics, evaluation, training)."""
