"""Writes ramp16.png: 256x2 16-bit grayscale, value at column x is x*257."""
import numpy as np
from PIL import Image

arr = np.tile((np.arange(256, dtype=np.uint32) * 257).astype(np.uint16), (2, 1))
Image.fromarray(arr).save("ramp16.png")
