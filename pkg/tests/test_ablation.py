import pytest

from irlsr.data import ImagePair, degrade, make_toy_image
from irlsr.model import ModelConfig
from irlsr.training import TrainConfig, format_csv, format_markdown, run_ablation, train_stage
from irlsr.training.ablation import expand_axes


@pytest.fixture(scope="module")
def setup():
    pairs = []
    for k in range(4):
        hr = make_toy_image(k, 32)
        pairs.append(ImagePair(f"img{k}", hr, degrade(hr, 4)))
    cfg = ModelConfig.default(4, 2, 8)
    tc = TrainConfig(iterations=3, batch_size=2, patch_size=6, val_every=3)
    master = train_stage(tc, cfg, pairs[:3], pairs[3:])
    return cfg, tc, master, pairs[:3], pairs[3:]


def test_single_configuration_one_row(setup):
    cfg, tc, master, tr, va = setup
    rows = run_ablation(cfg, tc, master, tr, va, {"variant": ["down"], "loss": ["L1"]})
    assert [(r.variant, r.loss) for r in rows] == [("down", "L1")]
    assert len(format_markdown(rows).splitlines()) == 3


def test_same_seed_identical_rows(setup):
    cfg, tc, master, tr, va = setup
    a = run_ablation(cfg, tc, master, tr, va, {"loss": ["L1", "L2"]})
    b = run_ablation(cfg, tc, master, tr, va, {"loss": ["L1", "L2"]})
    assert [(r.psnr, r.ssim) for r in a] == [(r.psnr, r.ssim) for r in b]
    assert a[0].master_psnr == b[0].master_psnr


def test_master_untouched_and_depth_two(setup):
    cfg, tc, master, tr, va = setup
    rows = run_ablation(cfg, tc, master, tr, va, {"variant": ["up"]}, depth=2)
    assert len(rows) == 1 and rows[0].loss == "L2"
    assert master.n_branches == 1
    with pytest.raises(ValueError):
        run_ablation(cfg, tc, master, tr, va, {"variant": ["up"]}, depth=3)


def test_axis_order_is_documented_order():
    base = ModelConfig.default(4)
    assert expand_axes({"loss": ["L2", "L1"], "variant": ["down", "up"]}, base) == [
        ("up", "L1"), ("up", "L2"), ("down", "L1"), ("down", "L2")]
    assert expand_axes({}, base) == [("up", "L2")]
    with pytest.raises(ValueError):
        expand_axes({"depth": [1]}, base)
    with pytest.raises(ValueError):
        expand_axes({"loss": ["L3"]}, base)


def test_csv_format(setup):
    cfg, tc, master, tr, va = setup
    rows = run_ablation(cfg, tc, master, tr, va, {"loss": ["L2"]})
    lines = format_csv(rows).splitlines()
    assert lines[0] == "variant,loss,psnr_db,ssim,master_psnr_db,wall_clock_s"
    assert lines[1].startswith("up,L2,")
