"""Evaluation package"""
