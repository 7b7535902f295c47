"""
Descriptor words for the procedural pre-training captions.
"""

# Category c uses pattern c // 4 and tint c % 4, giving 20 categories
CATEGORY_PATTERNS = ("stripes", "blobs", "grain", "waves", "rings")
CATEGORY_TINTS = ("red", "green", "blue", "gray")

# Spectral slope of the base texture
SCALE_WORDS = ("coarse", "fine")

# Visual traits each generator family leaves in its images
FAMILY_WORDS = {
    "real": ("natural", "noisy"),
    "gan_like": ("checkered", "sharp"),
    "diffusion_like": ("smooth", "soft"),
    "commercial_like": ("polished", "mixed"),
}


def category_words(category: int):
    return (
        CATEGORY_PATTERNS[(category // len(CATEGORY_TINTS)) % len(CATEGORY_PATTERNS)],
        CATEGORY_TINTS[category % len(CATEGORY_TINTS)],
    )


def describe(family: str, category: int, scale_index: int) -> str:
    """
    Build the caption of one sample, e.g. ``"stripes red coarse checkered sharp"``

    Args:
        family: GeneratorFamily value
        category: Object category index
        scale_index: Index into SCALE_WORDS

    Returns:
        Space separated descriptor caption
    """
    pattern, tint = category_words(category)
    return " ".join((pattern, tint, SCALE_WORDS[scale_index], *FAMILY_WORDS[family]))
