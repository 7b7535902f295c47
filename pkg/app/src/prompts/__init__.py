"""
Words used to build the closed vocabulary: class words and caption descriptors.
"""
