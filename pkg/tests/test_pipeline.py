import json

import pytest

from egohighlights.ingest import load_manifest
from egohighlights.pipeline import (
    PipelineConfig,
    PipelineError,
    RunOptions,
    config_hash,
    corpus_hash,
    load_pipeline_config,
    run_pipeline,
)

from conftest import write_corpus


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe_corpus")
    return write_corpus(root, frames_per_scene=8)


def fast_cfg():
    cfg = PipelineConfig()
    cfg.shots.window = 2
    cfg.rank.album_size = 3
    return cfg


class TestCaching:
    def test_rerun_hits_every_stage(self, corpus, tmp_path):
        m = load_manifest(corpus)
        cfg = fast_cfg()
        opts = RunOptions(cache_dir=tmp_path / "cache")
        first = run_pipeline(m, cfg, opts)
        assert set(first.cache_events.values()) == {"miss"}
        second = run_pipeline(m, cfg, RunOptions(cache_dir=tmp_path / "cache"))
        assert set(second.cache_events.values()) == {"hit"}
        assert json.dumps(first.report, sort_keys=True) == json.dumps(second.report, sort_keys=True)

    def test_config_change_invalidates_downstream_only(self, corpus, tmp_path):
        m = load_manifest(corpus)
        cfg = fast_cfg()
        opts = RunOptions(cache_dir=tmp_path / "cache")
        run_pipeline(m, cfg, opts)
        cfg2 = fast_cfg()
        cfg2.shots.beta = 0.5
        events = run_pipeline(m, cfg2, RunOptions(cache_dir=tmp_path / "cache")).cache_events
        assert events["shots"] == "miss"           # depends on beta
        assert events["descriptors"] == "hit"      # upstream of shots
        assert events["aesthetics"] == "hit"
        assert events["head_tilt"] == "hit"

    def test_descriptor_config_change_invalidates_descriptors(self, corpus, tmp_path):
        from egohighlights.descriptors import GistConfig

        m = load_manifest(corpus)
        cfg = fast_cfg()
        run_pipeline(m, cfg, RunOptions(cache_dir=tmp_path / "cache"))
        cfg2 = fast_cfg()
        cfg2.gist = GistConfig(prefilter=False)
        events = run_pipeline(m, cfg2, RunOptions(cache_dir=tmp_path / "cache")).cache_events
        assert events["descriptors"] == "miss"
        assert events["shots"] == "miss"          # chained downstream
        assert events["aesthetics"] == "hit"      # independent of descriptors
        assert events["head_tilt"] == "hit"

    def test_input_change_invalidates_everything(self, corpus, tmp_path):
        import shutil

        m = load_manifest(corpus)
        cfg = fast_cfg()
        run_pipeline(m, cfg, RunOptions(cache_dir=tmp_path / "cache"))
        # new corpus with one modified frame
        root2 = tmp_path / "corpus2"
        shutil.copytree(corpus.parent, root2)
        frame0 = sorted((root2 / "cam0").iterdir())[0]
        from PIL import Image
        import numpy as np
        Image.fromarray(np.full((120, 160, 3), 9, dtype=np.uint8)).save(frame0)
        m2 = load_manifest(root2 / "manifest.json")
        events = run_pipeline(m2, cfg, RunOptions(cache_dir=tmp_path / "cache")).cache_events
        assert set(events.values()) == {"miss"}


class TestDeterminism:
    def test_parallelism_invariant(self, corpus):
        m = load_manifest(corpus)
        cfg = fast_cfg()
        seq = run_pipeline(m, cfg, RunOptions(parallelism=1, use_cache=False))
        par = run_pipeline(m, cfg, RunOptions(parallelism=8, use_cache=False))
        assert json.dumps(seq.report, sort_keys=True) == json.dumps(par.report, sort_keys=True)

    def test_parallelism_not_in_provenance(self, corpus):
        m = load_manifest(corpus)
        cfg = fast_cfg()
        a = run_pipeline(m, cfg, RunOptions(parallelism=1, use_cache=False))
        b = run_pipeline(m, cfg, RunOptions(parallelism=4, use_cache=False))
        assert a.report["provenance"] == b.report["provenance"]

    def test_config_change_changes_provenance(self, corpus):
        cfg = fast_cfg()
        cfg2 = fast_cfg()
        cfg2.rank.lambda1 = 0.75
        assert config_hash(cfg) != config_hash(cfg2)


class TestConfigLoading:
    def test_round_trip(self, tmp_path):
        doc = {"shots": {"window": 7, "beta": 0.8}, "rank": {"album_size": 9}}
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps(doc))
        cfg = load_pipeline_config(p)
        assert cfg.shots.window == 7
        assert cfg.shots.beta == 0.8
        assert cfg.rank.album_size == 9
        assert cfg.rank.lambda1 == 0.8  # untouched default

    def test_unknown_keys_rejected(self, tmp_path):
        p = tmp_path / "cfg.json"
        p.write_text(json.dumps({"shots": {"windw": 7}}))
        with pytest.raises(ValueError, match="windw"):
            load_pipeline_config(p)
        p.write_text(json.dumps({"bogus_section": {}}))
        with pytest.raises(ValueError, match="bogus_section"):
            load_pipeline_config(p)


class TestGeoIntegration:
    def test_no_track_skips_geo(self, corpus):
        m = load_manifest(corpus)
        res = run_pipeline(m, fast_cfg(), RunOptions())
        assert res.report["geo"]["enabled"] is False
        assert res.report["geo"]["skipped_reason"] == "no GPS track in manifest"

    def test_track_filters_frames(self, tmp_path):
        root = tmp_path / "c"
        manifest_path = write_corpus(root, frames_per_scene=10, scenes=1, fps=30.0)
        track = root / "track.csv"
        track.write_text("timestamp,lat,lon,speed\n0.0,10,20,0\n0.2,10,20,0\n")
        doc = json.loads(manifest_path.read_text())
        doc["gps_track"] = "track.csv"
        manifest_path.write_text(json.dumps(doc))
        m = load_manifest(manifest_path)
        res = run_pipeline(m, fast_cfg(), RunOptions())
        assert res.report["geo"]["enabled"] is True
        # only frames with t in [0, 0.2]: indices 0..6 at 30 fps
        assert len(res.frames) == 7
        assert all(f["gps_linked"] for f in res.report["frames"])

    def test_filter_removing_everything_fails_loud(self, tmp_path):
        root = tmp_path / "c"
        manifest_path = write_corpus(root, frames_per_scene=5, scenes=1)
        track = root / "track.csv"
        track.write_text("timestamp,lat,lon,speed\n500.0,10,20,0\n501.0,10,20,0\n")
        doc = json.loads(manifest_path.read_text())
        doc["gps_track"] = "track.csv"
        manifest_path.write_text(json.dumps(doc))
        with pytest.raises(PipelineError, match="geo filter"):
            run_pipeline(load_manifest(manifest_path), fast_cfg(), RunOptions())


def test_multi_source_windows_do_not_straddle(tmp_path):
    from PIL import Image
    from conftest import scene_frame

    for sid, (h, w) in (("a", (120, 160)), ("b", (90, 120))):
        d = tmp_path / sid
        d.mkdir()
        for i in range(8):
            Image.fromarray(scene_frame(0, i, h, w)).save(d / f"frame_{i:08d}.png")
    (tmp_path / "m.json").write_text(json.dumps({"sources": [
        {"source_id": "a", "path": "a", "fps": 30},
        {"source_id": "b", "path": "b", "fps": 30, "start": 100},
    ]}))
    res = run_pipeline(load_manifest(tmp_path / "m.json"), fast_cfg(), RunOptions())
    assert len(res.frames) == 16
    shots_a = {s.shot_id for f, s in zip(res.frames, res.scores) if f.source_id == "a"}
    shots_b = {s.shot_id for f, s in zip(res.frames, res.scores) if f.source_id == "b"}
    assert shots_a.isdisjoint(shots_b)


def test_corpus_hash_sensitive_to_content(corpus, tmp_path):
    import shutil

    m1 = load_manifest(corpus)
    h1 = corpus_hash(m1)
    root2 = tmp_path / "copy"
    shutil.copytree(corpus.parent, root2)
    assert corpus_hash(load_manifest(root2 / "manifest.json")) == h1
    (root2 / "cam0" / "frame_00000000.png").write_bytes(b"\x89PNG changed")
    assert corpus_hash(load_manifest(root2 / "manifest.json")) != h1
