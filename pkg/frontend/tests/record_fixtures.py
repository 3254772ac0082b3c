"""Record HTTP fixtures from a real loosekey service for the studio tests.

Builds a tiny checkpoint, spins the FastAPI app up in-process and captures:
  skeleton.json        GET /skeleton response
  generate_roundtrip.json   accepted /generate payload + response summary
  edit_roundtrip.json       accepted /edit payload + response summary

Run from the repository root:  python3 frontend/tests/record_fixtures.py
"""
import json
import tempfile
from pathlib import Path

import numpy as np
import torch
from fastapi.testclient import TestClient

from loosekey.datagen import DatagenConfig, build_dataset, load_dataset, synth_source_motions
from loosekey.denoiser import Denoiser, NetConfig, save_checkpoint
from loosekey.diffusion import make_schedule
from loosekey.motion import PoseLayout
from loosekey.service import create_app
from loosekey.skeleton import default_skeleton
from loosekey.training import TrainConfig, train

FIXTURES = Path(__file__).parent / "fixtures"


def identity_pose(layout: PoseLayout, rest_positions) -> list[float]:
    pose = np.zeros(layout.dim)
    for j in range(layout.num_joints):
        pose[6 * j] = 1.0
        pose[6 * j + 4] = 1.0
    pose[layout.joint_positions] = np.asarray(rest_positions).ravel()
    return [float(v) for v in pose]


def main() -> None:
    FIXTURES.mkdir(parents=True, exist_ok=True)
    sk = default_skeleton()
    layout = PoseLayout(num_joints=8, shape_dims=0, contact_dims=4)
    with tempfile.TemporaryDirectory() as tmp:
        data_dir = Path(tmp) / "data"
        sources = synth_source_motions(2, sk, 120, seed=5)
        build_dataset(sources, DatagenConfig(seed=11), data_dir, skeleton=sk)
        _, pairs = load_dataset(data_dir)
        torch.manual_seed(0)
        model = Denoiser(NetConfig(frames=60, dim=layout.dim, latent=32, layers=2,
                                   heads=4, ff=64, warp_hidden=(64, 32)))
        train(pairs, model, make_schedule("cosine", 8),
              TrainConfig(steps=30, batch_size=8, log_every=15))
        ckpt = Path(tmp) / "ckpt.lkck"
        save_checkpoint(model, ckpt, extra={
            "schedule": {"kind": "cosine", "num_steps": 8},
            "layout": layout.to_dict(), "skeleton": sk.to_dict(),
            "fps": 30.0, "max_shift": 5, "config_hash": "fixture"})
        app = create_app(ckpt, artifacts=Path(tmp) / "artifacts")
        with TestClient(app) as client:
            skeleton_doc = client.get("/skeleton").json()
            (FIXTURES / "skeleton.json").write_text(json.dumps(skeleton_doc, indent=2))

            pose = identity_pose(layout, skeleton_doc["rest_positions"])
            gen_payload = {
                "keyframes": [
                    {"frame": 12, "pose": pose},
                    {"frame": 44, "pose": pose},
                ],
                "F_total": 60,
                "num_samples": 1,
                "seed": 7,
            }
            gen_resp = client.post("/generate", json=gen_payload)
            assert gen_resp.status_code == 200, gen_resp.text
            gen_body = gen_resp.json()
            (FIXTURES / "generate_roundtrip.json").write_text(json.dumps({
                "request": gen_payload,
                "response": {
                    "status_code": gen_resp.status_code,
                    "status": gen_body["status"],
                    "num_motions": len(gen_body.get("motion_ids", [])),
                },
            }, indent=2))

            base_id = gen_body["motion_ids"][0]
            edit_payload = {
                "base_motion_id": base_id,
                "keep_ranges": [[0, 20]],
                "keyframes": [{"frame": 40, "pose": pose}],
                "F_total": 60,
                "num_samples": 1,
                "seed": 9,
            }
            edit_resp = client.post("/edit", json=edit_payload)
            assert edit_resp.status_code == 200, edit_resp.text
            edit_body = edit_resp.json()
            (FIXTURES / "edit_roundtrip.json").write_text(json.dumps({
                "request": {**edit_payload, "base_motion_id": "BASE_MOTION_ID"},
                "response": {
                    "status_code": edit_resp.status_code,
                    "status": edit_body["status"],
                    "num_motions": len(edit_body.get("motion_ids", [])),
                },
            }, indent=2))
    print(f"fixtures written to {FIXTURES}")


if __name__ == "__main__":
    main()
