"""Weighted U-statistic goodness-of-fit tests for multinomial data."""
