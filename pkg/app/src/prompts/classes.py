"""
Class words and reserved tokens of the text encoder.
"""

SOS_TOKEN = "[SOS]"
EOS_TOKEN = "[EOS]"
PAD_TOKEN = "[PAD]"
RESERVED_TOKENS = (SOS_TOKEN, EOS_TOKEN, PAD_TOKEN)

# Single-word captions; "fake" is the positive class everywhere
REAL_WORD = "real"
FAKE_WORD = "fake"
CLASS_WORDS = (REAL_WORD, FAKE_WORD)

# Filler words so free-form captions such as "a photo of a fake image" tokenize
FILLER_WORDS = ("a", "an", "the", "photo", "of", "image", "picture")
