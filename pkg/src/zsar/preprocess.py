"""Image preprocessing matching the frozen encoder's training recipe.

Bicubic resize of the shorter side to 224, center crop to 224x224, RGB,
then per-channel normalization with the published contrastive-VLM
constants. Output frames are float32 HWC arrays; the backend transposes
to whatever layout its graph expects.
"""

from __future__ import annotations

import numpy as np
from PIL import Image

IMAGE_SIZE = 224
CHANNEL_MEAN = np.array([0.48145466, 0.4578275, 0.40821073], dtype=np.float32)
CHANNEL_STD = np.array([0.26862954, 0.26130258, 0.27577711], dtype=np.float32)


def preprocess_image(image) -> np.ndarray:
    """Preprocess one image (PIL image or uint8 HWC RGB array) to float32 HWC."""
    if isinstance(image, np.ndarray):
        image = Image.fromarray(image)
    if image.mode != "RGB":
        image = image.convert("RGB")
    w, h = image.size
    scale = IMAGE_SIZE / min(w, h)
    new_w, new_h = round(w * scale), round(h * scale)
    image = image.resize((new_w, new_h), Image.BICUBIC)
    left = (new_w - IMAGE_SIZE) // 2
    top = (new_h - IMAGE_SIZE) // 2
    image = image.crop((left, top, left + IMAGE_SIZE, top + IMAGE_SIZE))
    array = np.asarray(image, dtype=np.float32) / 255.0
    return (array - CHANNEL_MEAN) / CHANNEL_STD
