"""daqa: domain-adversarial training for extractive QA at desk scale."""

__version__ = "0.1.0"
