"""Preference-consistent feature distillation for top-N recommendation."""
