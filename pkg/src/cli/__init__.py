"""CLI application package"""
