"""RGB to HSV / CIE L*a*b* conversion and per-channel statistics.

Hue is reported in degrees [0, 360) with H = 0 for achromatic pixels.
L*a*b* uses sRGB gamma expansion and the D65 white point.
"""

import numpy as np

from .errors import EmptyInputError

# sRGB -> XYZ (D65, 2 degree observer); rows sum to the white point
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE_D65 = np.array([0.95047, 1.0, 1.08883])

# CIE f(t) breakpoint (6/29)^3 and linear-segment slope
_LAB_EPS = 216.0 / 24389.0
_LAB_KAPPA = 24389.0 / 27.0


def hsv_planes(image):
    """Convert an (H, W, 3) uint8 RGB image to float H, S, V planes."""
    arr = np.asarray(image, dtype=np.float64)
    r, g, b = arr[..., 0], arr[..., 1], arr[..., 2]
    mx = np.maximum(np.maximum(r, g), b)
    mn = np.minimum(np.minimum(r, g), b)
    delta = mx - mn

    v = mx / 255.0
    s = np.where(mx > 0, delta / np.where(mx > 0, mx, 1.0), 0.0)

    with np.errstate(invalid="ignore", divide="ignore"):
        safe = np.where(delta > 0, delta, 1.0)
        h_r = np.mod((g - b) / safe, 6.0)
        h_g = (b - r) / safe + 2.0
        h_b = (r - g) / safe + 4.0
    h = np.where(mx == r, h_r, np.where(mx == g, h_g, h_b))
    h = np.where(delta > 0, 60.0 * h, 0.0)
    return h, s, v


def lab_planes(image):
    """Convert an (H, W, 3) uint8 RGB image to float L*, a*, b* planes."""
    arr = np.asarray(image, dtype=np.float64) / 255.0
    linear = np.where(arr <= 0.04045, arr / 12.92, ((arr + 0.055) / 1.055) ** 2.4)
    r, g, b = linear[..., 0], linear[..., 1], linear[..., 2]
    # Elementwise arithmetic (not a BLAS matmul) keeps identical pixels
    # bit-identical regardless of their position in the array.
    m = _RGB_TO_XYZ
    xyz = np.stack(
        [m[i, 0] * r + m[i, 1] * g + m[i, 2] * b for i in range(3)], axis=-1
    )
    t = xyz / _WHITE_D65
    f = np.where(t > _LAB_EPS, np.cbrt(t), (_LAB_KAPPA * t + 16.0) / 116.0)
    fx, fy, fz = f[..., 0], f[..., 1], f[..., 2]
    l_star = 116.0 * fy - 16.0
    a_star = 500.0 * (fx - fy)
    b_star = 200.0 * (fy - fz)
    return l_star, a_star, b_star


def rgb_to_hsv(pixel):
    """Convert one (R, G, B) triple in [0, 255] to (H deg, S, V)."""
    h, s, v = hsv_planes(np.asarray(pixel, dtype=np.float64).reshape(1, 1, 3))
    return float(h[0, 0]), float(s[0, 0]), float(v[0, 0])


def rgb_to_lab(pixel):
    """Convert one (R, G, B) triple in [0, 255] to (L*, a*, b*)."""
    l, a, b = lab_planes(np.asarray(pixel, dtype=np.float64).reshape(1, 1, 3))
    return float(l[0, 0]), float(a[0, 0]), float(b[0, 0])


def channel_stats(values):
    """Return (mean, median, sample SD) of a nonempty value sequence.

    SD uses the n-1 denominator and is 0 for a single value.
    """
    arr = np.asarray(values, dtype=np.float64).ravel()
    if arr.size == 0:
        raise EmptyInputError("channel_stats requires at least one value")
    # Constant input short-circuits: accumulated rounding would otherwise
    # leave the SD of identical values a few ulps above zero.
    if arr.size == 1 or arr.min() == arr.max():
        value = float(arr[0])
        return value, value, 0.0
    return float(np.mean(arr)), float(np.median(arr)), float(np.std(arr, ddof=1))
