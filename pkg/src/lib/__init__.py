"""Library package"""
