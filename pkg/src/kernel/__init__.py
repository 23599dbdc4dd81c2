"""Numeric kernel package"""
