"""Thin-plate-spline rectification: solve exactness, grids, sampling, gradients."""

import pytest
import torch

from fdcheck import relative_gradient_error
from handrec.errors import DegenerateInputError, InvalidInputError, ShapeError
from handrec.rectify import (
    ControlPoints,
    LocalizationNetwork,
    Rectifier,
    SamplingGrid,
    bilinear_weights,
    build_fiducial_points,
    generate_grid,
    normalized_lattice,
    predict_control_points,
    sample_bilinear,
    solve_tps,
    solve_tps_batch,
)


def random_points(n, seed, spread=0.9):
    gen = torch.Generator().manual_seed(seed)
    return torch.rand(n, 2, generator=gen, dtype=torch.float64) * 2 * spread - spread


class TestControlPoints:
    def test_fiducial_layout_two_rows(self):
        pts = build_fiducial_points(20)
        assert pts.shape == (20, 2)
        assert torch.all(pts[:10, 1] == -0.8)
        assert torch.all(pts[10:, 1] == 0.8)
        # left-to-right within each row
        assert torch.all(pts[1:10, 0] > pts[:9, 0])
        assert torch.all(pts[11:, 0] > pts[10:19, 0])

    def test_fresh_network_outputs_fiducial_exactly(self):
        torch.manual_seed(0)
        net = LocalizationNetwork(num_points=20, input_size=(16, 64), channels=(8, 16), fc_hidden=32)
        net.eval()
        image = torch.rand(24, 80) * 2 - 1
        points = predict_control_points(image, net)
        assert points.count == 20
        assert torch.allclose(points.points.double(), build_fiducial_points(20), atol=1e-6)

    def test_points_in_unit_box_for_any_image(self):
        torch.manual_seed(1)
        net = LocalizationNetwork(num_points=12, input_size=(16, 64), channels=(8, 16), fc_hidden=32)
        # non-trivial weights: perturb the final layer away from the zero init
        with torch.no_grad():
            net.fc2.weight.normal_(0, 0.5)
        net.eval()
        for seed in range(5):
            gen = torch.Generator().manual_seed(seed)
            image = torch.rand(32, 64, generator=gen) * 2 - 1
            points = predict_control_points(image, net)
            assert points.points.abs().max() <= 1.0

    def test_deterministic(self):
        torch.manual_seed(2)
        net = LocalizationNetwork(num_points=12, input_size=(16, 64), channels=(8, 16), fc_hidden=32)
        net.eval()
        image = torch.rand(32, 64)
        a = predict_control_points(image, net)
        b = predict_control_points(image.clone(), net)
        assert torch.equal(a.points, b.points)

    def test_non_finite_image_rejected(self):
        torch.manual_seed(0)
        net = LocalizationNetwork(num_points=12, input_size=(16, 64), channels=(8, 16), fc_hidden=32)
        image = torch.full((16, 32), float("nan"))
        with pytest.raises(InvalidInputError):
            predict_control_points(image, net)

    def test_control_points_validate_range(self):
        with pytest.raises(InvalidInputError):
            ControlPoints(torch.tensor([[0.0, 0.0], [2.0, 0.0], [0.0, 1.0]]))


class TestTpsSolve:
    def test_identity_solution(self):
        fid = build_fiducial_points(20)
        transform = solve_tps(ControlPoints(fid.clone()), ControlPoints(fid.clone()))
        identity = torch.tensor([[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], dtype=torch.float64)
        assert torch.allclose(transform.affine, identity, atol=1e-6)
        assert transform.weights.abs().max() < 1e-6

    def test_pure_translation(self):
        fid = build_fiducial_points(10)
        shift = torch.tensor([0.1, 0.0], dtype=torch.float64)
        transform = solve_tps(ControlPoints(fid.clone()), ControlPoints(fid + shift))
        query = random_points(40, seed=3)
        moved = transform.apply(query)
        assert (moved - (query + shift)).abs().max() < 1e-6

    def test_interpolation_exactness_random(self):
        for seed in range(10):
            src = random_points(12, seed=seed)
            tgt = random_points(12, seed=seed + 1000)
            transform = solve_tps(ControlPoints(src), ControlPoints(tgt))
            assert (transform.apply(src) - tgt).abs().max() < 1e-4

    def test_side_conditions(self):
        # weights orthogonal to the affine basis [1, x, y] at the source points
        src = random_points(15, seed=7)
        tgt = random_points(15, seed=8)
        transform = solve_tps(ControlPoints(src), ControlPoints(tgt))
        basis = torch.cat([torch.ones(15, 1, dtype=torch.float64), src], dim=1)
        assert (basis.T @ transform.weights).abs().max() < 1e-6

    def test_collinear_sources_rejected(self):
        xs = torch.linspace(-0.9, 0.9, 8, dtype=torch.float64)
        src = torch.stack([xs, torch.zeros(8, dtype=torch.float64)], dim=1)
        tgt = random_points(8, seed=9)
        with pytest.raises(DegenerateInputError):
            solve_tps(ControlPoints(src), ControlPoints(tgt))

    def test_duplicate_sources_rejected(self):
        src = random_points(6, seed=10)
        src[3] = src[0]
        tgt = random_points(6, seed=11)
        with pytest.raises(DegenerateInputError):
            solve_tps(ControlPoints(src), ControlPoints(tgt))

    def test_count_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            solve_tps(ControlPoints(random_points(6, 0)), ControlPoints(random_points(8, 1)))

    def test_too_few_points_rejected(self):
        with pytest.raises(DegenerateInputError):
            solve_tps_batch(torch.zeros(1, 2, 2), torch.zeros(1, 2, 2))


class TestGridGeneration:
    def test_identity_grid_is_lattice(self):
        fid = build_fiducial_points(20)
        transform = solve_tps(ControlPoints(fid.clone()), ControlPoints(fid.clone()))
        grid = generate_grid(transform, 4, 4)
        assert (grid.coords - normalized_lattice(4, 4)).abs().max() < 1e-5

    def test_translation_grid_shifts(self):
        fid = build_fiducial_points(10)
        shift = torch.tensor([0.1, 0.0], dtype=torch.float64)
        transform = solve_tps(ControlPoints(fid.clone()), ControlPoints(fid + shift))
        grid = generate_grid(transform, 5, 7)
        expected = normalized_lattice(5, 7) + shift
        assert (grid.coords - expected).abs().max() < 1e-6

    def test_degenerate_axis_uses_center(self):
        fid = build_fiducial_points(10)
        transform = solve_tps(ControlPoints(fid.clone()), ControlPoints(fid.clone()))
        grid = generate_grid(transform, 1, 1)
        assert grid.coords.shape == (1, 1, 2)
        assert grid.coords.abs().max() < 1e-6  # T((0,0)) = (0,0) for identity

    def test_positive_size_required(self):
        fid = build_fiducial_points(10)
        transform = solve_tps(ControlPoints(fid.clone()), ControlPoints(fid.clone()))
        with pytest.raises(InvalidInputError):
            generate_grid(transform, 0, 4)


class TestBilinearSampler:
    def test_identity_grid_reproduces_image(self):
        torch.manual_seed(0)
        image = torch.rand(6, 9, dtype=torch.float64)
        grid = normalized_lattice(6, 9)
        assert (sample_bilinear(image, grid) - image).abs().max() < 1e-6

    def test_constant_image_stays_constant(self):
        image = torch.full((5, 5), 0.37, dtype=torch.float64)
        gen = torch.Generator().manual_seed(1)
        grid = torch.rand(7, 3, 2, generator=gen, dtype=torch.float64) * 2 - 1
        out = sample_bilinear(image, SamplingGrid(grid))
        assert torch.allclose(out, torch.full((7, 3), 0.37, dtype=torch.float64))

    def test_center_of_2x2(self):
        image = torch.tensor([[0.0, 1.0], [2.0, 3.0]])
        out = sample_bilinear(image, torch.tensor([[[0.0, 0.0]]]))
        assert out.item() == pytest.approx(1.5, abs=1e-7)

    def test_partition_of_unity(self):
        gen = torch.Generator().manual_seed(2)
        grid = torch.rand(50, 2, generator=gen, dtype=torch.float64) * 3 - 1.5  # beyond the box too
        _, weights = bilinear_weights(grid, height=8, width=16)
        assert (weights.sum(-1) - 1.0).abs().max() < 1e-7

    def test_out_of_range_clamps_to_border(self):
        image = torch.arange(12, dtype=torch.float64).reshape(3, 4)
        grid = torch.tensor([[[-5.0, -5.0], [5.0, 5.0]]], dtype=torch.float64)
        out = sample_bilinear(image, grid)
        assert out[0, 0].item() == image[0, 0].item()
        assert out[0, 1].item() == image[-1, -1].item()


class TestDifferentiability:
    def test_rectified_image_gradient_wrt_localization(self):
        """Analytic gradient through points -> TPS solve -> grid -> sampler
        matches central differences on an 8x16 toy image."""
        torch.manual_seed(0)
        rect = Rectifier(
            num_points=6,
            output_size=(8, 16),
            loc_input_size=(8, 16),
            loc_channels=(4,),
            loc_fc_hidden=8,
        ).double()
        rect.eval()
        gen = torch.Generator().manual_seed(5)
        image = torch.rand(1, 1, 8, 16, generator=gen, dtype=torch.float64) * 2 - 1
        probe = torch.rand(1, 1, 8, 16, generator=gen, dtype=torch.float64)
        # make the predicted points non-trivial so the TPS path is exercised
        with torch.no_grad():
            rect.localization.fc2.weight.normal_(0, 0.05, generator=gen)
        params = [p for p in rect.localization.parameters() if p.requires_grad]

        def scalar():
            return (rect(image) * probe).sum()

        assert relative_gradient_error(scalar, params, eps=1e-6) < 1e-4
