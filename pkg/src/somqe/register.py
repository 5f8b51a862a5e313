"""Subpixel alignment of equal-size frames by intensity descent.

A translation (optionally translation plus rotation about the frame center)
is fitted coarse to fine over a 2x2 box-filter pyramid.  At each level a
Levenberg-Marquardt loop minimizes the mean squared luminance difference
between the fixed reference and the moving frame resampled through the
current transform.  Only pixels whose inverse-mapped source position lands
fully inside the moving frame contribute to the residual, so borders swept
in from outside never bias the fit.

Conventions, shared with `resample`:
  * pixel (row y, col x), x grows right, y grows down
  * forward map p_out = R(theta) (p_in - c) + c + (dx, dy), with c the image
    center ((w-1)/2, (h-1)/2) and R a counterclockwise rotation in (x, y)
  * resampling is bilinear with clamp-to-edge, inverse mapping, and is exact
    for integer shifts (the identity transform copies the image bitwise)
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import InputError, RegistrationError
from .raster import RasterImage, atomic_write_bytes

_MODES = ("translation", "rigid")

# LM configuration: finite-difference step per parameter, convergence
# thresholds on the proposed update, iteration and damping budgets
_FD_STEP_PX = 0.01
_FD_STEP_RAD = 1e-4
_CONVERGED_PX = 1e-4
_CONVERGED_RAD = 1e-6
_MAX_LM_ITERATIONS = 50
_LAMBDA_INITIAL = 1e-3
_LAMBDA_MAX = 1e12

_MIN_PYRAMID_DIM = 32


@dataclass(frozen=True)
class RegistrationTransform:
    """Rigid (or pure-translation) map between two equal-size frames."""

    mode: str
    dx: float
    dy: float
    theta: float = 0.0

    def __post_init__(self):
        if self.mode not in _MODES:
            raise InputError(f"mode must be one of {_MODES}")
        if not all(map(math.isfinite, (self.dx, self.dy, self.theta))):
            raise InputError("transform parameters must be finite")
        if self.mode == "translation" and self.theta != 0.0:
            raise InputError("translation transform cannot carry a rotation")
        theta = math.remainder(self.theta, math.tau)
        if theta == -math.pi:
            theta = math.pi
        object.__setattr__(self, "theta", theta)

    def as_parameters(self) -> np.ndarray:
        if self.mode == "translation":
            return np.array([self.dx, self.dy])
        return np.array([self.dx, self.dy, self.theta])

    def inverse(self) -> "RegistrationTransform":
        c, s = math.cos(self.theta), math.sin(self.theta)
        # p_in = R(-theta) (p_out - c - t) + c
        idx = -(c * self.dx + s * self.dy)
        idy = -(-s * self.dx + c * self.dy)
        return RegistrationTransform(self.mode, idx, idy, -self.theta)

    def compose(self, other: "RegistrationTransform") -> "RegistrationTransform":
        """Transform equivalent to applying `other` first, then self."""
        c, s = math.cos(self.theta), math.sin(self.theta)
        dx = c * other.dx - s * other.dy + self.dx
        dy = s * other.dx + c * other.dy + self.dy
        mode = "rigid" if "rigid" in (self.mode, other.mode) else "translation"
        return RegistrationTransform(mode, dx, dy, self.theta + other.theta)


def identity_transform(mode: str = "translation") -> RegistrationTransform:
    return RegistrationTransform(mode, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class Pyramid:
    """Coarse-to-fine image stack; levels[0] is the full-resolution frame."""

    levels: tuple[RasterImage, ...]


def _halve(a: np.ndarray) -> np.ndarray:
    # plain 2x2 block means; a trailing odd row or column is dropped so
    # every level has exactly floor(previous / 2) in each dimension
    h2, w2 = a.shape[0] // 2, a.shape[1] // 2
    t = a[: 2 * h2, : 2 * w2]
    return (t[0::2, 0::2] + t[0::2, 1::2] + t[1::2, 0::2] + t[1::2, 1::2]) * 0.25


def build_pyramid(image: RasterImage) -> Pyramid:
    """Halve with a 2x2 box filter until the next level would drop below
    32 pixels in either dimension."""
    levels = [image]
    current = image.pixels
    while min(current.shape[0] // 2, current.shape[1] // 2) >= _MIN_PYRAMID_DIM:
        current = _halve(current)
        levels.append(RasterImage(current))
    return Pyramid(tuple(levels))


def _inverse_sample_coords(height, width, dx, dy, theta):
    cx = (width - 1) / 2.0
    cy = (height - 1) / 2.0
    xs = np.arange(width, dtype=np.float64)
    ys = np.arange(height, dtype=np.float64)
    X, Y = np.meshgrid(xs, ys)
    ux = X - cx - dx
    uy = Y - cy - dy
    c, s = math.cos(theta), math.sin(theta)
    sx = c * ux + s * uy + cx
    sy = -s * ux + c * uy + cy
    return sx, sy


def _bilinear(data: np.ndarray, sx: np.ndarray, sy: np.ndarray) -> np.ndarray:
    """Sample `data` (h, w) or (h, w, C) at float coords, clamping to edges."""
    h, w = data.shape[:2]
    planar = data.ndim == 2
    if planar:
        data = data[:, :, None]
    sxc = np.clip(sx, 0.0, w - 1.0)
    syc = np.clip(sy, 0.0, h - 1.0)
    x0 = np.floor(sxc).astype(np.int64)
    y0 = np.floor(syc).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (sxc - x0)[:, :, None]
    fy = (syc - y0)[:, :, None]
    top = (1.0 - fx) * data[y0, x0] + fx * data[y0, x1]
    bottom = (1.0 - fx) * data[y1, x0] + fx * data[y1, x1]
    out = (1.0 - fy) * top + fy * bottom
    return out[:, :, 0] if planar else out


def resample(image: RasterImage, transform: RegistrationTransform) -> RasterImage:
    """Apply the transform to the image, sampling by inverse mapping."""
    sx, sy = _inverse_sample_coords(
        image.height, image.width, transform.dx, transform.dy, transform.theta
    )
    return RasterImage(_bilinear(image.pixels, sx, sy))


def valid_mask(height: int, width: int, transform: RegistrationTransform) -> np.ndarray:
    """Output pixels whose source sample lies fully inside the frame."""
    sx, sy = _inverse_sample_coords(
        height, width, transform.dx, transform.dy, transform.theta
    )
    return (sx >= 0.0) & (sx <= width - 1.0) & (sy >= 0.0) & (sy <= height - 1.0)


def _params_to_transform(p: np.ndarray, mode: str) -> RegistrationTransform:
    theta = float(p[2]) if mode == "rigid" else 0.0
    return RegistrationTransform(mode, float(p[0]), float(p[1]), theta)


def _update_is_small(delta: np.ndarray) -> bool:
    if math.hypot(delta[0], delta[1]) >= _CONVERGED_PX:
        return False
    return len(delta) < 3 or abs(delta[2]) < _CONVERGED_RAD


def _lm_level(reference: np.ndarray, moving: np.ndarray, p0: np.ndarray):
    """One pyramid level of damped Gauss-Newton on luminance planes.

    Returns (parameters, mean-square residual, converged).  Convergence is
    declared as soon as the proposed update drops below the thresholds, so a
    pair already at its optimum (for one, two identical frames at zero)
    returns the starting parameters bit for bit.
    """
    h, w = reference.shape
    nparams = p0.size
    steps = np.array([_FD_STEP_PX, _FD_STEP_PX, _FD_STEP_RAD])[:nparams]

    def evaluate(params):
        theta = params[2] if nparams == 3 else 0.0
        sx, sy = _inverse_sample_coords(h, w, params[0], params[1], theta)
        warped = _bilinear(moving, sx, sy)
        mask = (sx >= 0.0) & (sx <= w - 1.0) & (sy >= 0.0) & (sy <= h - 1.0)
        return warped, mask

    p = p0.astype(np.float64).copy()
    warped, mask = evaluate(p)
    count = int(mask.sum())
    if count == 0:
        return p, math.inf, False
    residual = (warped - reference)[mask]
    cost = float(residual @ residual) / count
    lam = _LAMBDA_INITIAL
    for _ in range(_MAX_LM_ITERATIONS):
        jacobian = np.empty((count, nparams))
        for k in range(nparams):
            plus = p.copy()
            plus[k] += steps[k]
            minus = p.copy()
            minus[k] -= steps[k]
            wp, _ = evaluate(plus)
            wm, _ = evaluate(minus)
            jacobian[:, k] = (wp - wm)[mask] / (2.0 * steps[k])
        normal = (jacobian.T @ jacobian) / count
        gradient = (jacobian.T @ residual) / count
        accepted = False
        while lam <= _LAMBDA_MAX:
            damped = normal + lam * np.diag(np.diag(normal)) + 1e-12 * np.eye(nparams)
            try:
                delta = np.linalg.solve(damped, -gradient)
            except np.linalg.LinAlgError:
                return p, cost, False
            if _update_is_small(delta):
                return p, cost, True
            candidate = p + delta
            cwarped, cmask = evaluate(candidate)
            ccount = int(cmask.sum())
            if ccount > 0:
                cresidual = (cwarped - reference)[cmask]
                ccost = float(cresidual @ cresidual) / ccount
            else:
                ccost = math.inf
            if ccost < cost:
                p, cost = candidate, ccost
                mask, residual, count = cmask, cresidual, ccount
                lam = max(lam * 0.1, 1e-12)
                accepted = True
                break
            lam *= 10.0
        if not accepted:
            return p, cost, False
    return p, cost, False


def register_pair(
    reference: RasterImage,
    test: RasterImage,
    mode: str = "translation",
) -> RegistrationTransform:
    """Transform T such that resample(test, T) best matches the reference.

    Solved coarse to fine; the translation estimate doubles between levels.
    Raises RegistrationError (carrying the best transform and its residual)
    when the finest level fails to converge.
    """
    if mode not in _MODES:
        raise InputError(f"mode must be one of {_MODES}")
    if (reference.height, reference.width) != (test.height, test.width):
        raise InputError(
            f"size mismatch: reference {reference.width}x{reference.height}, "
            f"test {test.width}x{test.height}"
        )
    nparams = 2 if mode == "translation" else 3
    ref_levels = [lvl.luminance() for lvl in build_pyramid(reference).levels]
    test_levels = [lvl.luminance() for lvl in build_pyramid(test).levels]
    p = np.zeros(nparams)
    cost = math.inf
    converged = True
    for level in range(len(ref_levels) - 1, -1, -1):
        if level != len(ref_levels) - 1:
            p[:2] *= 2.0
        p, cost, converged = _lm_level(ref_levels[level], test_levels[level], p)
    if not converged:
        best = _params_to_transform(p, mode)
        raise RegistrationError(
            "registration did not converge at the finest pyramid level",
            transform=best,
            residual=cost,
        )
    return _params_to_transform(p, mode)


def register_stack(images, mode: str = "translation"):
    """Align every frame to the last one.

    Returns [(transform, aligned image)] in input order; the anchor entry is
    the identity transform with the original frame.  A non-converging pair
    re-raises with the offending frame index attached.
    """
    frames = list(images)
    if not frames:
        raise InputError("empty image stack")
    anchor = frames[-1]
    for i, frame in enumerate(frames):
        if (frame.height, frame.width) != (anchor.height, anchor.width):
            raise InputError(
                f"size mismatch: frame {i} is {frame.width}x{frame.height}, "
                f"anchor is {anchor.width}x{anchor.height}"
            )
    out = []
    for i, frame in enumerate(frames[:-1]):
        try:
            transform = register_pair(anchor, frame, mode)
        except RegistrationError as exc:
            raise RegistrationError(
                f"frame {i}: {exc}",
                transform=exc.transform,
                residual=exc.residual,
                index=i,
            ) from exc
        out.append((transform, resample(frame, transform)))
    out.append((identity_transform(mode), anchor))
    return out


def mean_square_residual(
    reference: RasterImage,
    aligned: RasterImage,
    transform: RegistrationTransform,
) -> float:
    """Mean squared luminance difference over the transform's valid pixels."""
    mask = valid_mask(reference.height, reference.width, transform)
    if not mask.any():
        return math.inf
    diff = (aligned.luminance() - reference.luminance())[mask]
    return float(diff @ diff) / diff.size


# ---------------------------------------------------------------------------
# transform sidecar

_SIDECAR_MAGIC = "somqe-transforms"
_SIDECAR_VERSION = "v1"


def write_transform_sidecar(path, records) -> None:
    """Write one line per frame: index mode dx dy theta residual.

    Floats use %.17g, comfortably past the 12 significant digits the format
    promises.  `records` is an iterable of (index, transform, residual).
    """
    lines = [
        f"# {_SIDECAR_MAGIC} {_SIDECAR_VERSION}",
        "# columns: index mode dx dy theta residual",
    ]
    for index, transform, residual in records:
        lines.append(
            "%d %s %.17g %.17g %.17g %.17g"
            % (index, transform.mode, transform.dx, transform.dy,
               transform.theta, residual)
        )
    atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))


def read_transform_sidecar(path):
    """Parse a sidecar back into [(index, transform, residual)]."""
    records = []
    with open(path, "r", encoding="ascii") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 6:
                raise InputError(f"transform sidecar line {lineno}: expected 6 fields")
            try:
                index = int(parts[0])
                dx, dy, theta, residual = map(float, parts[2:])
            except ValueError:
                raise InputError(
                    f"transform sidecar line {lineno}: non-numeric field"
                ) from None
            records.append(
                (index, RegistrationTransform(parts[1], dx, dy, theta), residual)
            )
    return records
