"""Learnable geometric rectification of word images.

A small localization network predicts control points on the input image; a
thin-plate spline anchored at a canonical two-row layout is solved so that the
output lattice maps onto those points; bilinear resampling then produces the
rectified image. Everything is differentiable end to end, so the recognizer's
loss trains the localization weights.

Coordinates are normalized to [-1, 1]^2, x rightward, y downward; the TPS
kernel is U(r) = r^2 log r^2 with U(0) = 0, and the solve runs in float64
regardless of the surrounding model precision.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import DegenerateInputError, InvalidInputError, ShapeError


@dataclass
class ControlPoints:
    """Ordered 2-D points in [-1, 1]^2: top row left-to-right, then bottom row."""

    points: torch.Tensor  # (K, 2)

    def __post_init__(self):
        if self.points.ndim != 2 or self.points.shape[1] != 2:
            raise ShapeError(f"control points must be (K, 2), got {tuple(self.points.shape)}")
        if not torch.isfinite(self.points).all():
            raise InvalidInputError("control points contain non-finite values")
        if self.points.abs().max() > 1.0 + 1e-6:
            raise InvalidInputError("control point coordinates must lie in [-1, 1]")

    @property
    def count(self) -> int:
        return self.points.shape[0]


@dataclass
class TpsTransform:
    """Solved thin-plate spline: affine part plus radial weights at the source points."""

    affine: torch.Tensor  # (2, 3), columns are coefficients of (1, x, y)
    weights: torch.Tensor  # (K, 2)
    source: ControlPoints

    def apply(self, query: torch.Tensor) -> torch.Tensor:
        """Map (N, 2) query points through the transform."""
        return apply_tps(
            self.affine.unsqueeze(0),
            self.weights.unsqueeze(0),
            self.source.points.unsqueeze(0),
            query.unsqueeze(0),
        ).squeeze(0)


@dataclass
class SamplingGrid:
    """Per-output-pixel source coordinates; values outside [-1,1] are clamped by the sampler."""

    coords: torch.Tensor  # (H_out, W_out, 2)

    def __post_init__(self):
        if self.coords.ndim != 3 or self.coords.shape[2] != 2:
            raise ShapeError(f"grid must be (H, W, 2), got {tuple(self.coords.shape)}")


def build_fiducial_points(
    count: int = 20, y_offset: float = 0.8, x_margin: float = 0.9
) -> torch.Tensor:
    """Default control-point layout: two horizontal rows of count/2 points."""
    if count < 4 or count % 2:
        raise InvalidInputError(f"control point count must be even and >= 4, got {count}")
    half = count // 2
    xs = torch.linspace(-x_margin, x_margin, half, dtype=torch.float64)
    top = torch.stack([xs, torch.full((half,), -y_offset, dtype=torch.float64)], dim=1)
    bottom = torch.stack([xs, torch.full((half,), y_offset, dtype=torch.float64)], dim=1)
    return torch.cat([top, bottom], dim=0)


def tps_kernel(sq_dist: torch.Tensor) -> torch.Tensor:
    """U(r) = r^2 log r^2 evaluated on squared distances, with U(0) = 0."""
    positive = sq_dist > 0
    safe = torch.where(positive, sq_dist, torch.ones_like(sq_dist))
    return torch.where(positive, sq_dist * torch.log(safe), torch.zeros_like(sq_dist))


def solve_tps_batch(source: torch.Tensor, target: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Solve the TPS linear system for a batch of point pairings.

    source, target: (B, K, 2). Returns (affine (B, 2, 3), weights (B, K, 2)).
    The augmented system [[K, P], [P^T, 0]] enforces the side conditions
    (weights orthogonal to 1, x, y). Raises on singular or near-singular
    configurations (collinear or duplicated source points).
    """
    if source.shape != target.shape or source.ndim != 3 or source.shape[2] != 2:
        raise ShapeError(
            f"source/target must both be (B, K, 2), got {tuple(source.shape)} and {tuple(target.shape)}"
        )
    b, k, _ = source.shape
    if k < 3:
        raise DegenerateInputError(f"TPS needs at least 3 control points, got {k}")
    src = source.double()
    tgt = target.double()

    diff = src.unsqueeze(2) - src.unsqueeze(1)  # (B, K, K, 2)
    kern = tps_kernel((diff * diff).sum(-1))
    ones = torch.ones(b, k, 1, dtype=torch.float64, device=src.device)
    p = torch.cat([ones, src], dim=2)  # (B, K, 3)

    system = torch.zeros(b, k + 3, k + 3, dtype=torch.float64, device=src.device)
    system[:, :k, :k] = kern
    system[:, :k, k:] = p
    system[:, k:, :k] = p.transpose(1, 2)
    rhs = torch.zeros(b, k + 3, 2, dtype=torch.float64, device=src.device)
    rhs[:, :k] = tgt

    try:
        solution = torch.linalg.solve(system, rhs)
    except torch.linalg.LinAlgError as exc:
        raise DegenerateInputError(f"singular TPS system (collinear or duplicate points): {exc}") from None

    weights = solution[:, :k]  # (B, K, 2)
    affine = solution[:, k:].transpose(1, 2)  # (B, 2, 3)

    # near-singular solves fail the defining interpolation property
    mapped = apply_tps(affine, weights, src, src)
    residual = (mapped - tgt).abs().max()
    if not torch.isfinite(residual) or residual > 1e-4:
        raise DegenerateInputError(
            f"near-singular TPS system: interpolation residual {residual:.3e} exceeds 1e-4"
        )
    return affine, weights


def apply_tps(
    affine: torch.Tensor, weights: torch.Tensor, source: torch.Tensor, query: torch.Tensor
) -> torch.Tensor:
    """Evaluate batched TPS transforms at query points.

    affine (B, 2, 3), weights (B, K, 2), source (B, K, 2), query (B, N, 2)
    -> (B, N, 2), computed in float64 and cast back to the query dtype.
    """
    out_dtype = query.dtype
    aff = affine.double()
    w = weights.double()
    src = source.double()
    q = query.double()
    ones = torch.ones(*q.shape[:-1], 1, dtype=torch.float64, device=q.device)
    affine_term = torch.cat([ones, q], dim=-1) @ aff.transpose(1, 2)  # (B, N, 2)
    diff = q.unsqueeze(2) - src.unsqueeze(1)  # (B, N, K, 2)
    radial = tps_kernel((diff * diff).sum(-1)) @ w  # (B, N, 2)
    return (affine_term + radial).to(out_dtype)


def solve_tps(source: ControlPoints, target: ControlPoints) -> TpsTransform:
    """Solve one thin-plate spline mapping source points onto target points."""
    if source.count != target.count:
        raise ShapeError(f"point counts differ: {source.count} vs {target.count}")
    affine, weights = solve_tps_batch(
        source.points.unsqueeze(0), target.points.unsqueeze(0)
    )
    return TpsTransform(affine=affine[0], weights=weights[0], source=source)


def normalized_lattice(
    out_h: int, out_w: int, dtype=torch.float64, device=None
) -> torch.Tensor:
    """Uniform lattice over [-1,1]^2 of shape (H, W, 2); a length-1 axis sits at 0."""
    if out_h < 1 or out_w < 1:
        raise InvalidInputError(f"lattice size must be positive, got {out_h}x{out_w}")
    xs = (
        torch.linspace(-1.0, 1.0, out_w, dtype=dtype, device=device)
        if out_w > 1
        else torch.zeros(1, dtype=dtype, device=device)
    )
    ys = (
        torch.linspace(-1.0, 1.0, out_h, dtype=dtype, device=device)
        if out_h > 1
        else torch.zeros(1, dtype=dtype, device=device)
    )
    gy, gx = torch.meshgrid(ys, xs, indexing="ij")
    return torch.stack([gx, gy], dim=-1)


def generate_grid(transform: TpsTransform, out_h: int, out_w: int) -> SamplingGrid:
    """Transform the uniform output lattice into source sampling coordinates."""
    lattice = normalized_lattice(out_h, out_w, dtype=torch.float64, device=transform.affine.device)
    coords = transform.apply(lattice.reshape(-1, 2)).reshape(out_h, out_w, 2)
    return SamplingGrid(coords=coords)


def bilinear_weights(
    grid: torch.Tensor, height: int, width: int
) -> tuple[torch.Tensor, torch.Tensor]:
    """Corner indices and interpolation weights for each grid coordinate.

    grid (..., 2) in [-1, 1] (clamped beyond) -> indices (..., 4) flat into
    H*W, weights (..., 4) summing to 1. Gradients flow through the weights.
    """
    gx = grid[..., 0].clamp(-1.0, 1.0)
    gy = grid[..., 1].clamp(-1.0, 1.0)
    fx = (gx + 1.0) * 0.5 * max(width - 1, 0)
    fy = (gy + 1.0) * 0.5 * max(height - 1, 0)
    x0 = fx.floor().clamp(0, max(width - 2, 0))
    y0 = fy.floor().clamp(0, max(height - 2, 0))
    tx = fx - x0
    ty = fy - y0
    x0l = x0.long()
    y0l = y0.long()
    x1l = (x0l + 1).clamp(max=width - 1)
    y1l = (y0l + 1).clamp(max=height - 1)
    idx = torch.stack(
        [
            y0l * width + x0l,
            y0l * width + x1l,
            y1l * width + x0l,
            y1l * width + x1l,
        ],
        dim=-1,
    )
    w = torch.stack(
        [(1 - tx) * (1 - ty), tx * (1 - ty), (1 - tx) * ty, tx * ty], dim=-1
    )
    return idx, w


def sample_bilinear(image: torch.Tensor, grid: SamplingGrid | torch.Tensor) -> torch.Tensor:
    """Resample a single H x W image at the grid coordinates (border-clamped)."""
    coords = grid.coords if isinstance(grid, SamplingGrid) else grid
    if image.ndim != 2:
        raise ShapeError(f"expected a 2-D image, got shape {tuple(image.shape)}")
    batched = sample_bilinear_batch(
        image.unsqueeze(0).unsqueeze(0), coords.unsqueeze(0).to(image.dtype)
    )
    return batched[0, 0]


def sample_bilinear_batch(images: torch.Tensor, grid: torch.Tensor) -> torch.Tensor:
    """Bilinear resampling of (B, C, H, W) images at (B, Ho, Wo, 2) grids."""
    if images.ndim != 4:
        raise ShapeError(f"expected (B, C, H, W) images, got {tuple(images.shape)}")
    b, c, h, w = images.shape
    _, out_h, out_w, _ = grid.shape
    idx, wts = bilinear_weights(grid, h, w)  # (B, Ho, Wo, 4)
    flat = images.reshape(b, c, h * w)
    idx = idx.reshape(b, 1, -1).expand(b, c, out_h * out_w * 4)
    gathered = flat.gather(2, idx).reshape(b, c, out_h, out_w, 4)
    return (gathered * wts.unsqueeze(1)).sum(-1)


class LocalizationNetwork(nn.Module):
    """Predicts control points from a downsampled copy of the input image.

    Strided convolutions feed two fully connected layers; the final layer is
    zero-initialized with its bias set so the tanh output starts exactly at
    the fiducial layout, i.e. training begins from identity rectification.
    """

    def __init__(
        self,
        num_points: int = 20,
        input_size: tuple[int, int] = (32, 128),
        channels: tuple[int, ...] = (16, 32, 64, 128),
        fc_hidden: int = 256,
        y_offset: float = 0.8,
        x_margin: float = 0.9,
    ):
        super().__init__()
        self.num_points = num_points
        self.input_size = tuple(input_size)
        layers = []
        cin = 1
        for cout in channels:
            layers += [nn.Conv2d(cin, cout, 3, stride=2, padding=1), nn.BatchNorm2d(cout), nn.ReLU(inplace=True)]
            cin = cout
        self.conv = nn.Sequential(*layers)
        down = 2 ** len(channels)
        feat_h = self.input_size[0] // down
        feat_w = self.input_size[1] // down
        if feat_h < 1 or feat_w < 1:
            raise InvalidInputError(
                f"localization input {self.input_size} too small for {len(channels)} strided convs"
            )
        self.fc1 = nn.Linear(channels[-1] * feat_h * feat_w, fc_hidden)
        self.fc2 = nn.Linear(fc_hidden, num_points * 2)
        fiducial = build_fiducial_points(num_points, y_offset, x_margin)
        with torch.no_grad():
            self.fc2.weight.zero_()
            self.fc2.bias.copy_(torch.atanh(fiducial).reshape(-1).float())

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 1, H, W) -> control points (B, K, 2) in [-1, 1]^2."""
        if images.ndim != 4 or images.shape[1] != 1:
            raise ShapeError(f"expected (B, 1, H, W) input, got {tuple(images.shape)}")
        if not torch.isfinite(images).all():
            raise InvalidInputError("localization input contains non-finite values")
        x = images
        if tuple(x.shape[2:]) != self.input_size:
            x = F.interpolate(x, size=self.input_size, mode="bilinear", align_corners=True)
        x = self.conv(x)
        x = F.relu(self.fc1(x.flatten(1)))
        x = torch.tanh(self.fc2(x))
        return x.reshape(-1, self.num_points, 2)


def predict_control_points(image: torch.Tensor, net: LocalizationNetwork) -> ControlPoints:
    """Run the localization network on one H x W image."""
    if image.ndim != 2:
        raise ShapeError(f"expected a 2-D image, got shape {tuple(image.shape)}")
    if not torch.isfinite(image).all():
        raise InvalidInputError("image contains non-finite values")
    pts = net(image.unsqueeze(0).unsqueeze(0))[0]
    return ControlPoints(points=pts)


class Rectifier(nn.Module):
    """Full rectification pipeline: predict points, solve TPS, generate grid, resample."""

    def __init__(
        self,
        num_points: int = 20,
        output_size: tuple[int, int] = (64, 256),
        loc_input_size: tuple[int, int] = (32, 128),
        loc_channels: tuple[int, ...] = (16, 32, 64, 128),
        loc_fc_hidden: int = 256,
    ):
        super().__init__()
        self.output_size = tuple(output_size)
        self.localization = LocalizationNetwork(
            num_points=num_points,
            input_size=loc_input_size,
            channels=loc_channels,
            fc_hidden=loc_fc_hidden,
        )
        self.register_buffer("base_points", build_fiducial_points(num_points).float())

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 1, H, W) -> rectified (B, 1, out_h, out_w)."""
        b = images.shape[0]
        points = self.localization(images)
        base = self.base_points.unsqueeze(0).expand(b, -1, -1).to(images.dtype)
        affine, weights = solve_tps_batch(base, points)
        out_h, out_w = self.output_size
        lattice = normalized_lattice(out_h, out_w, dtype=torch.float64, device=images.device)
        query = lattice.reshape(1, -1, 2).expand(b, -1, -1)
        grid = apply_tps(affine, weights, base.double(), query).reshape(b, out_h, out_w, 2)
        return sample_bilinear_batch(images, grid.to(images.dtype))
