"""Synthetic scenes, augmentation and dataset manifests."""
