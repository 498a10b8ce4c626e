"""End-to-end tests of the command-line surface: config layering, each
subcommand on tiny inputs, rerun determinism, and exit codes."""

import json

import numpy as np
import pytest

from mutualgaze import formats
from mutualgaze.cli import CONFIG_SCHEMA, echo_config, load_run_config, main
from mutualgaze.records import BoundingBox, HeadDetection, HeadTrack

TINY_KEYS = {"window_length": 4, "map_frames": 2, "crop_size": 16,
             "map_size": 16, "epochs": 2, "batch_size": 4,
             "pretrain_epochs": 1, "min_track_length": 5}


@pytest.fixture
def tiny_config(tmp_path):
    path = tmp_path / "tiny.json"
    path.write_text(json.dumps(TINY_KEYS))
    return str(path)


class TestLoadRunConfig:
    def test_defaults_cover_every_key(self):
        cfg = load_run_config()
        assert set(cfg) == set(CONFIG_SCHEMA)
        assert cfg["seed"] == 0
        assert cfg["window_length"] == 10

    def test_file_then_overrides_layering(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"seed": 3, "lr": 0.01}')
        cfg = load_run_config(path, overrides={"seed": 9})
        assert cfg["seed"] == 9
        assert cfg["lr"] == 0.01
        assert cfg["momentum"] == 0.9

    def test_unknown_key_rejected_with_origin(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"warp_speed": 9}')
        with pytest.raises(ValueError, match="warp_speed"):
            load_run_config(path)
        with pytest.raises(ValueError, match="command line"):
            load_run_config(None, overrides={"warp_speed": 9})

    def test_type_checking(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text('{"lr": "fast"}')
        with pytest.raises(ValueError, match="lr must be float"):
            load_run_config(path)
        path.write_text('{"epochs": 2.5}')
        with pytest.raises(ValueError, match="integer"):
            load_run_config(path)
        path.write_text('{"epochs": 2.0}')
        assert load_run_config(path)["epochs"] == 2

    def test_invalid_json_rejected(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{nope")
        with pytest.raises(ValueError, match="not valid JSON"):
            load_run_config(path)
        path.write_text("[1, 2]")
        with pytest.raises(ValueError, match="JSON object"):
            load_run_config(path)

    def test_echo_config_roundtrips(self, tmp_path):
        cfg = load_run_config()
        echo_config(cfg, tmp_path / "run")
        text = (tmp_path / "run" / "config.json").read_text()
        assert json.loads(text) == cfg
        assert text.endswith("\n")


class TestMainPlumbing:
    def test_no_command_prints_help(self, capsys):
        assert main([]) == 1
        assert "subcommand" in capsys.readouterr().out

    def test_unknown_command_exits_one(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["warp"])
        assert exc.value.code == 1

    def test_config_error_exits_one(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"warp_speed": 9}')
        code = main(["synth", "--pos", "1", "--neg", "1",
                     "--out", str(tmp_path / "o"), "--config", str(bad)])
        assert code == 1
        assert "warp_speed" in capsys.readouterr().err

    def test_missing_input_exits_two(self, tmp_path, capsys):
        code = main(["eval", "--scores", str(tmp_path / "nope.jsonl"),
                     "--annotations", str(tmp_path / "nope2.jsonl")])
        assert code == 2
        assert "i/o error" in capsys.readouterr().err

    def test_domain_validation_exits_one(self, tmp_path, capsys):
        cfgfile = tmp_path / "c.json"
        cfgfile.write_text('{"tau_deg": 95.0}')
        code = main(["synth", "--pos", "1", "--neg", "1",
                     "--out", str(tmp_path / "o"), "--config", str(cfgfile)])
        assert code == 1
        assert "tau" in capsys.readouterr().err


class TestTrackCommand:
    def test_links_detections_and_echoes_config(self, tmp_path, capsys):
        detections = [
            formats.detection_to_record(
                HeadDetection("v", f, BoundingBox(10, 10, 30, 30), 0.9))
            for f in range(12)
        ]
        det_path = tmp_path / "det.jsonl"
        formats.write_jsonl(det_path, formats.DETECTIONS_FORMAT, detections)
        out = tmp_path / "run"
        assert main(["track", "--detections", str(det_path),
                     "--out", str(out)]) == 0
        assert "into 1 tracks" in capsys.readouterr().out
        tracks = [formats.record_to_track(r) for r in
                  formats.read_jsonl(out / "tracks.jsonl",
                                     formats.TRACKS_FORMAT)]
        assert len(tracks) == 1
        assert len(tracks[0]) == 12
        echoed = json.loads((out / "config.json").read_text())
        assert echoed["iou_threshold"] == 0.5


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    """synth -> train -> score artifacts shared by the later stages."""
    base = tmp_path_factory.mktemp("pipeline")
    cfgfile = base / "tiny.json"
    cfgfile.write_text(json.dumps(TINY_KEYS))
    data = base / "data"
    run = base / "run"
    scored = base / "scored"
    assert main(["synth", "--pos", "6", "--neg", "6", "--out", str(data),
                 "--config", str(cfgfile)]) == 0
    assert main(["train", "--data", str(data), "--out", str(run),
                 "--config", str(cfgfile)]) == 0
    assert main(["score", "--data", str(data / "val"),
                 "--model", str(run / "model.ckpt"),
                 "--out", str(scored), "--config", str(cfgfile)]) == 0
    return base, cfgfile, data, run, scored


class TestSynthCommand:
    def test_writes_splits_and_effective_config(self, pipeline):
        _, _, data, _, _ = pipeline
        for split in ("train", "val"):
            assert (data / split / "index.jsonl").exists()
            assert (data / split / "tensors.bin").exists()
            assert (data / split / "annotations.jsonl").exists()
        echoed = json.loads((data / "config.json").read_text())
        assert echoed["window_length"] == 4
        assert echoed["crop_size"] == 16
        reader = formats.SampleReader(data / "val")
        tensors, _, _ = reader.load(0)
        assert tensors["left"].shape == (4, 16, 16, 3)

    def test_seed_flag_overrides_config(self, tmp_path, tiny_config):
        out = tmp_path / "seeded"
        assert main(["synth", "--pos", "1", "--neg", "1", "--out", str(out),
                     "--config", tiny_config, "--seed", "5"]) == 0
        assert json.loads((out / "config.json").read_text())["seed"] == 5

    def test_reruns_byte_identical(self, tmp_path, tiny_config):
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["synth", "--pos", "2", "--neg", "2",
                         "--out", str(out), "--config", tiny_config]) == 0
            outs.append(out)
        for rel in ("train/index.jsonl", "train/tensors.bin",
                    "val/annotations.jsonl", "config.json"):
            assert (outs[0] / rel).read_bytes() == \
                (outs[1] / rel).read_bytes()


class TestPretrainCommand:
    def test_writes_checkpoint_and_history(self, tmp_path, tiny_config,
                                           capsys):
        out = tmp_path / "pre"
        assert main(["pretrain", "--n", "6", "--out", str(out),
                     "--config", tiny_config]) == 0
        assert (out / "pretrain.ckpt").exists()
        lines = (out / "pretrain_history.csv").read_text().splitlines()
        assert lines[0] == "epoch,split,loss,ap"
        assert len(lines) == 2
        assert "pretrained on 6 heads" in capsys.readouterr().out


class TestTrainCommand:
    def test_writes_model_and_history(self, pipeline):
        _, _, _, run, _ = pipeline
        assert (run / "model.ckpt").exists()
        lines = (run / "history.csv").read_text().splitlines()
        assert lines[0] == "epoch,split,loss,ap"
        assert len(lines) == 1 + 2 * TINY_KEYS["epochs"]

    def test_init_from_pretrained_checkpoint(self, tmp_path, tiny_config,
                                             pipeline):
        _, _, data, _, _ = pipeline
        pre = tmp_path / "pre"
        assert main(["pretrain", "--n", "6", "--out", str(pre),
                     "--config", tiny_config]) == 0
        out = tmp_path / "warm"
        assert main(["train", "--data", str(data), "--out", str(out),
                     "--init", str(pre / "pretrain.ckpt"),
                     "--config", tiny_config]) == 0
        assert (out / "model.ckpt").exists()

    def test_rerun_byte_identical(self, tmp_path, tiny_config, pipeline):
        _, _, data, _, _ = pipeline
        outs = []
        for name in ("r1", "r2"):
            out = tmp_path / name
            assert main(["train", "--data", str(data), "--out", str(out),
                         "--config", tiny_config]) == 0
            outs.append(out)
        assert (outs[0] / "model.ckpt").read_bytes() == \
            (outs[1] / "model.ckpt").read_bytes()
        assert (outs[0] / "history.csv").read_bytes() == \
            (outs[1] / "history.csv").read_bytes()


class TestScoreCommand:
    def test_scores_every_sample(self, pipeline):
        _, _, data, _, scored = pipeline
        records = formats.read_jsonl(scored / "scores.jsonl",
                                     formats.SCORES_FORMAT)
        reader = formats.SampleReader(data / "val")
        assert len(records) == len(reader.labels)
        for r in records:
            assert 0.0 <= r["score"] <= 1.0
            assert r["video_id"].startswith("synth-0-")
            assert len(r["box_a"]) == 4

    def test_rerun_byte_identical(self, pipeline, tmp_path, tiny_config):
        _, _, data, run, scored = pipeline
        again = tmp_path / "again"
        assert main(["score", "--data", str(data / "val"),
                     "--model", str(run / "model.ckpt"),
                     "--out", str(again), "--config", tiny_config]) == 0
        assert (again / "scores.jsonl").read_bytes() == \
            (scored / "scores.jsonl").read_bytes()


class TestEvalCommand:
    def test_reports_ap_and_writes_artifacts(self, pipeline, tmp_path,
                                             capsys):
        _, cfgfile, data, _, scored = pipeline
        out = tmp_path / "eval"
        code = main(["eval", "--scores", str(scored / "scores.jsonl"),
                     "--annotations", str(data / "val" /
                                          "annotations.jsonl"),
                     "--out", str(out), "--config", str(cfgfile)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "AP=" in printed
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["protocol"] == "frame_iou"
        assert 0.0 <= metrics["ap"] <= 1.0
        lines = (out / "pr_curve.csv").read_text().splitlines()
        assert lines[0] == "threshold,precision,recall"
        assert len(lines) >= 2

    def test_protocol_flag_propagates(self, pipeline, tmp_path):
        _, cfgfile, data, _, scored = pipeline
        out = tmp_path / "evalhh"
        code = main(["eval", "--scores", str(scored / "scores.jsonl"),
                     "--annotations", str(data / "val" /
                                          "annotations.jsonl"),
                     "--protocol", "head_in_human", "--out", str(out),
                     "--config", str(cfgfile)])
        assert code == 0
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["protocol"] == "head_in_human"


class TestSocialCommand:
    def test_rows_graph_and_rankings(self, tmp_path, capsys):
        box_a = BoundingBox(0.0, 0.0, 10.0, 10.0)
        box_b = BoundingBox(20.0, 0.0, 30.0, 10.0)
        box_c = BoundingBox(40.0, 0.0, 50.0, 10.0)
        tracks = [HeadTrack(1, "v", 0, (box_a,) * 10),
                  HeadTrack(2, "v", 0, (box_b,) * 10),
                  HeadTrack(3, "v", 0, (box_c,) * 10)]
        formats.write_jsonl(tmp_path / "tracks.jsonl",
                            formats.TRACKS_FORMAT,
                            [formats.track_to_record(t) for t in tracks])
        formats.write_jsonl(tmp_path / "charmap.jsonl",
                            formats.CHARMAP_FORMAT,
                            [{"track_id": 1, "character": "alice"},
                             {"track_id": 2, "character": "bob"},
                             {"track_id": 3, "character": "carol"}])
        formats.write_jsonl(tmp_path / "shots.jsonl", formats.SHOTS_FORMAT,
                            [{"shot_id": "s1", "video_id": "v",
                              "first_frame": 0, "last_frame": 9}])
        scores = []
        for f in range(10):
            scores.append({"video_id": "v", "frame": f,
                           "box_a": list(box_a.as_tuple()),
                           "box_b": list(box_b.as_tuple()), "score": 0.9})
            scores.append({"video_id": "v", "frame": f,
                           "box_a": list(box_a.as_tuple()),
                           "box_b": list(box_c.as_tuple()), "score": 0.1})
        formats.write_jsonl(tmp_path / "scores.jsonl",
                            formats.SCORES_FORMAT, scores)
        formats.write_jsonl(
            tmp_path / "labels.jsonl", formats.ANNOTATIONS_FORMAT,
            [{"shot_id": "s1", "chars": ["alice", "bob"],
              "label": "interacting"},
             {"shot_id": "s1", "chars": ["alice", "carol"], "label": "not"},
             {"shot_id": "s1", "chars": ["bob", "carol"], "label": "not"}])

        out = tmp_path / "social"
        code = main(["social", "--tracks", str(tmp_path / "tracks.jsonl"),
                     "--charmap", str(tmp_path / "charmap.jsonl"),
                     "--shots", str(tmp_path / "shots.jsonl"),
                     "--scores", str(tmp_path / "scores.jsonl"),
                     "--labels", str(tmp_path / "labels.jsonl"),
                     "--out", str(out)])
        assert code == 0
        printed = capsys.readouterr().out
        assert "AL AP=1.0000" in printed
        lines = (out / "rows.csv").read_text().splitlines()
        assert len(lines) == 4
        assert lines[1].startswith("s1,alice,bob,0.900000,1.000000,")
        dot = (out / "graph.dot").read_text()
        assert '"alice" -- "bob"' in dot

    def test_unmatched_score_box_exits_one(self, tmp_path, capsys):
        box = BoundingBox(0.0, 0.0, 10.0, 10.0)
        formats.write_jsonl(tmp_path / "tracks.jsonl",
                            formats.TRACKS_FORMAT,
                            [formats.track_to_record(
                                HeadTrack(1, "v", 0, (box,) * 5))])
        formats.write_jsonl(tmp_path / "charmap.jsonl",
                            formats.CHARMAP_FORMAT,
                            [{"track_id": 1, "character": "alice"}])
        formats.write_jsonl(tmp_path / "shots.jsonl", formats.SHOTS_FORMAT,
                            [{"shot_id": "s1", "video_id": "v",
                              "first_frame": 0, "last_frame": 4}])
        formats.write_jsonl(tmp_path / "scores.jsonl",
                            formats.SCORES_FORMAT,
                            [{"video_id": "v", "frame": 0,
                              "box_a": [500.0, 500.0, 510.0, 510.0],
                              "box_b": list(box.as_tuple()),
                              "score": 0.5}])
        formats.write_jsonl(tmp_path / "labels.jsonl",
                            formats.ANNOTATIONS_FORMAT, [])
        code = main(["social", "--tracks", str(tmp_path / "tracks.jsonl"),
                     "--charmap", str(tmp_path / "charmap.jsonl"),
                     "--shots", str(tmp_path / "shots.jsonl"),
                     "--scores", str(tmp_path / "scores.jsonl"),
                     "--labels", str(tmp_path / "labels.jsonl"),
                     "--out", str(tmp_path / "social")])
        assert code == 1
        assert "no track owns box" in capsys.readouterr().err


class TestGradcheckCommand:
    def test_tiny_model_passes(self, capsys):
        assert main(["gradcheck", "--tiny"]) == 0
        out = capsys.readouterr().out
        assert "max relative error" in out
