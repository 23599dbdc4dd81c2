"""Parameter initialisation, optimisation and experiment drivers"""
