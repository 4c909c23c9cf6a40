"""Two-stage and prototype low-rank adaptation of a toy text-conditioned
diffusion model, plus the synthetic three-domain ship corpus and the
augmentation/evaluation harness around it."""

__version__ = "0.1.0"
