import numpy as np
import pytest

from stylenas import arch, io
from stylenas.cli import cli_dispatch, parse_config_file, search_config_from_file


@pytest.fixture()
def pair(tmp_path):
    rng = np.random.default_rng(0)
    content = rng.uniform(0, 1, (3, 64, 64)).astype(np.float32)
    style = rng.uniform(0, 1, (3, 64, 64)).astype(np.float32)
    cpath, spath = tmp_path / "content.ppm", tmp_path / "style.ppm"
    io.write_ppm(content, cpath)
    io.write_ppm(style, spath)
    return cpath, spath


def stdout_pairs(capsys):
    out = capsys.readouterr().out
    pairs = {}
    for line in out.splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            pairs[key] = value
    return pairs


def test_unknown_subcommand_exits_nonzero():
    assert cli_dispatch(["frobnicate"]) != 0


def test_missing_file_reports_error(tmp_path, capsys):
    rc = cli_dispatch(
        ["stylize", "--content", str(tmp_path / "nope.ppm"), "--style", str(tmp_path / "nope.ppm"),
         "--arch", "photonet", "--out", str(tmp_path / "o.ppm")]
    )
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_bad_arch_code_reports_error(pair, tmp_path, capsys):
    cpath, spath = pair
    rc = cli_dispatch(
        ["stylize", "--content", str(cpath), "--style", str(spath),
         "--arch", "01", "--out", str(tmp_path / "o.ppm")]
    )
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_stylize_writes_output(pair, tmp_path, capsys):
    cpath, spath = pair
    out = tmp_path / "out.ppm"
    rc = cli_dispatch(
        ["stylize", "--content", str(cpath), "--style", str(spath),
         "--arch", "photonet", "--base-width", "4", "--out", str(out)]
    )
    assert rc == 0
    pairs = stdout_pairs(capsys)
    assert pairs["out"] == str(out)
    img = io.read_ppm(out)
    assert img.shape == (3, 64, 64)


def test_stylize_is_bit_reproducible(pair, tmp_path):
    cpath, spath = pair
    outs = []
    for name in ("a.ppm", "b.ppm"):
        out = tmp_path / name
        rc = cli_dispatch(
            ["stylize", "--content", str(cpath), "--style", str(spath),
             "--arch", "photonet", "--base-width", "4", "--seed", "3", "--out", str(out)]
        )
        assert rc == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_decode_arch_lists_seven_slots(capsys):
    rc = cli_dispatch(["decode-arch", "0101000000100000000000000001111", "--base-width", "4"])
    assert rc == 0
    out = capsys.readouterr().out
    slot_lines = [l for l in out.splitlines() if l.startswith("slot=")]
    assert len(slot_lines) == 7
    assert "popcount=7" in out
    assert any("inert" in l for l in slot_lines)


def test_train_decoder_then_stylize_blend_zero(pair, tmp_path, capsys):
    from stylenas import train as train_mod

    _, spath = pair
    # in-distribution content: the same procedural family the decoder trains on
    content_img = train_mod.procedural_corpus(1, size=64, seed=900).images[0]
    cpath = tmp_path / "proc_content.ppm"
    io.write_ppm(content_img, cpath)

    weights = tmp_path / "w.pnwt"
    rc = cli_dispatch(
        ["train-decoder", "--arch", "1" * 31, "--out", str(weights),
         "--base-width", "4", "--corpus-size", "6", "--image-size", "64",
         "--steps", "300", "--batch", "2", "--seed", "1"]
    )
    assert rc == 0
    psnr_trained = float(stdout_pairs(capsys)["psnr"])
    assert psnr_trained > 10.0

    out = tmp_path / "rec.ppm"
    rc = cli_dispatch(
        ["stylize", "--content", str(cpath), "--style", str(spath),
         "--arch", "1" * 31, "--weights", str(weights), "--blend", "0",
         "--out", str(out)]
    )
    assert rc == 0
    pairs = stdout_pairs(capsys)
    # well above the ~6 dB of an untrained decoder on this family
    assert float(pairs["psnr_vs_content"]) > 8.0

    # blend=0 through the CLI is exactly the transfer-free reconstruction
    tensors = io.load_weights(weights)
    encoder = arch.Encoder.from_params(4, tensors)
    graph = arch.build_graph(arch.parse_code("1" * 31), 4, encoder)
    io.load_graph_weights(graph, weights)
    expected = arch.reconstruct(graph, io.read_ppm(cpath))
    produced = io.read_ppm(out)
    assert np.array_equal(
        np.rint(produced * 255), np.rint(np.clip(expected, 0, 1) * 255)
    )


def test_train_decoder_determinism(tmp_path):
    blobs = []
    for name in ("w1.pnwt", "w2.pnwt"):
        path = tmp_path / name
        rc = cli_dispatch(
            ["train-decoder", "--arch", "0" * 31, "--out", str(path),
             "--base-width", "4", "--corpus-size", "4", "--image-size", "32",
             "--steps", "10", "--batch", "2", "--seed", "5",
             "--trace", str(tmp_path / (name + ".csv"))]
        )
        assert rc == 0
        blobs.append(path.read_bytes())
    assert blobs[0] == blobs[1]
    assert (tmp_path / "w1.pnwt.csv").read_bytes() == (tmp_path / "w2.pnwt.csv").read_bytes()


def test_search_cli_with_config(tmp_path, capsys):
    cfg = tmp_path / "search.cfg"
    cfg.write_text(
        "population=4\nbudget=8\nalpha=0.8\nbeta=0.1\ngamma=0.1\n"
        "base_width=4\nimage_size=32\ncorpus_size=4\nval_pairs=2\n"
        "train.steps=8\ntrain.batch=2\nseed=3\n# comment line\n"
    )
    telemetry = tmp_path / "runs.csv"
    rc = cli_dispatch(["search", "--config", str(cfg), "--telemetry", str(telemetry)])
    assert rc == 0
    pairs = stdout_pairs(capsys)
    assert len(pairs["best_code"]) == 31
    assert telemetry.exists()
    header = telemetry.read_text().splitlines()[0]
    assert header.startswith("index,code,loss")
    assert len(telemetry.read_text().splitlines()) == 9


def test_search_cli_determinism(tmp_path):
    cfg = tmp_path / "search.cfg"
    cfg.write_text(
        "population=4\nbudget=7\nbase_width=4\nimage_size=32\ncorpus_size=4\n"
        "val_pairs=2\ntrain.steps=6\ntrain.batch=2\nseed=11\nworkers=1\n"
    )
    blobs = []
    for name in ("t1.csv", "t2.csv"):
        telemetry = tmp_path / name
        rc = cli_dispatch(["search", "--config", str(cfg), "--telemetry", str(telemetry)])
        assert rc == 0
        blobs.append(telemetry.read_bytes())
    assert blobs[0] == blobs[1]


def test_random_search_cli(tmp_path, capsys):
    cfg = tmp_path / "rs.cfg"
    cfg.write_text(
        "population=4\nbudget=5\nbase_width=4\nimage_size=32\ncorpus_size=4\n"
        "val_pairs=2\ntrain.steps=6\ntrain.batch=2\nseed=2\n"
    )
    rc = cli_dispatch(["random-search", "--config", str(cfg)])
    assert rc == 0
    assert stdout_pairs(capsys)["evaluations"] == "5"


def test_eval_metrics_cli(pair, tmp_path, capsys):
    cpath, spath = pair
    rc = cli_dispatch(
        ["eval-metrics", "--content", str(cpath), "--style", str(spath),
         "--result", str(cpath), "--base-width", "4"]
    )
    assert rc == 0
    pairs = stdout_pairs(capsys)
    assert float(pairs["ssim_whole"]) == 1.0
    assert float(pairs["ssim_edge"]) == 1.0


def test_bench_cli(capsys):
    rc = cli_dispatch(
        ["bench", "--arch", "photonas", "--base-width", "4",
         "--height", "64", "--width", "64", "--repeats", "3"]
    )
    assert rc == 0
    pairs = stdout_pairs(capsys)
    assert float(pairs["median_ms"]) > 0
    assert pairs["backend"] in ("compiled", "numpy")


def test_frames_mode_constant_input_is_stable(pair, tmp_path, capsys):
    cpath, spath = pair
    frames_dir = tmp_path / "frames"
    frames_dir.mkdir()
    frame = io.read_ppm(cpath)
    for i in range(3):
        io.write_ppm(frame, frames_dir / f"frame{i:03d}.ppm")
    out_dir = tmp_path / "out"
    rc = cli_dispatch(
        ["frames", "--frames", str(frames_dir), "--style", str(spath),
         "--arch", "photonet", "--base-width", "4", "--out-dir", str(out_dir)]
    )
    assert rc == 0
    blobs = [(out_dir / f"frame{i:03d}.ppm").read_bytes() for i in range(3)]
    assert blobs[0] == blobs[1] == blobs[2]


def test_config_file_parsing(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("population=6\n# comment\nalpha=0.5\nbeta=0.25\ngamma=0.25\ntrain.steps=9\n")
    values = parse_config_file(cfg)
    assert values["population"] == "6"
    sc = search_config_from_file(cfg)
    assert sc.population == 6
    assert sc.train_steps == 9
    assert sc.weights.alpha == 0.5


def test_config_file_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("not_a_key=1\n")
    with pytest.raises(Exception):
        search_config_from_file(cfg)


def test_train_decoder_with_directory_corpus(tmp_path, capsys):
    from stylenas import train as train_mod

    corpus_dir = tmp_path / "corpus"
    corpus_dir.mkdir()
    for i, img in enumerate(train_mod.procedural_corpus(4, size=32, seed=77).images):
        io.write_ppm(img, corpus_dir / f"img{i}.ppm")
    out = tmp_path / "w.pnwt"
    rc = cli_dispatch(
        ["train-decoder", "--arch", "0" * 31, "--out", str(out),
         "--corpus", str(corpus_dir), "--base-width", "4", "--image-size", "32",
         "--steps", "8", "--batch", "2", "--seed", "0"]
    )
    assert rc == 0
    assert out.exists()
    assert float(stdout_pairs(capsys)["final_loss"]) > 0


def test_stylize_with_adain_transfer(pair, tmp_path, capsys):
    cpath, spath = pair
    out = tmp_path / "adain.ppm"
    rc = cli_dispatch(
        ["stylize", "--content", str(cpath), "--style", str(spath),
         "--arch", "photonet", "--base-width", "4", "--transfer", "adain",
         "--out", str(out)]
    )
    assert rc == 0
    assert stdout_pairs(capsys)["transfer"] == "adain"
    wct_out = tmp_path / "wct.ppm"
    assert cli_dispatch(
        ["stylize", "--content", str(cpath), "--style", str(spath),
         "--arch", "photonet", "--base-width", "4", "--transfer", "wct",
         "--out", str(wct_out)]
    ) == 0
    assert out.read_bytes() != wct_out.read_bytes()


def test_eval_metrics_dim_mismatch_is_a_clean_error(pair, tmp_path, capsys):
    cpath, spath = pair
    rng = np.random.default_rng(1)
    small = rng.uniform(0, 1, (3, 32, 32)).astype(np.float32)
    rpath = tmp_path / "small.ppm"
    io.write_ppm(small, rpath)
    rc = cli_dispatch(
        ["eval-metrics", "--content", str(cpath), "--style", str(spath),
         "--result", str(rpath), "--base-width", "4"]
    )
    assert rc == 1
    assert "error:" in capsys.readouterr().err
