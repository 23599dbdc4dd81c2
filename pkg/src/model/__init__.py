"""Polarity-wise rating model"""
