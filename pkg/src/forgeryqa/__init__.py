"""Desk-scale interpretable face-forgery detection.

Builds self-blended question-answer datasets from paired face images and
trains a toy vision-language model with multi-granularity prompts,
quality-routed hybrid LoRA experts, and a three-stage training schedule.
"""

__version__ = "0.1.0"
