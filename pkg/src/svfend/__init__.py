"""Multimodal fake-news short-video detection and benchmarking toolkit."""

__version__ = "0.1.0"
