"""Train a small captioner on a handful of objects and caption them.

Uses reduced dimensions so the whole script runs in under a minute.

Run:  python3 demos/02_train_small.py
"""

from objcap import synthgen, trainer

scenes = synthgen.generate_corpus(num_scenes=6, seed=42, num_frames=16)
objects = [o for _, _, objs in scenes for o in objs]
frames = {spec.video_id: fr for spec, fr, _ in scenes}
print(f"{len(objects)} objects over {len(scenes)} scenes")

config = trainer.TrainConfig(
    epochs=120, T_s=10,
    feature_dim=32, embed_dim=32, hidden_dim=64, attn_dim=32, enh_hidden=64,
    learning_rate=1e-3, seed=0)

ckpt = trainer.train(config, objects, frames)

print("\nloss curve (every 20 epochs):")
for epoch, l_cap, l_de, total in ckpt.history[::20]:
    print(f"  epoch {epoch:>3}  cap={l_cap:7.3f}  de={l_de:6.3f}  "
          f"total={total:7.3f}")

samples = trainer.prepare_samples(objects, frames, config, ckpt.vocab)
print("\ngreedy captions vs references:")
for s in samples[:6]:
    caption, pred = trainer.generate_for_sample(ckpt, s)
    print(f"  ref : {' '.join(s.caption_tokens)}")
    print(f"  gen : {' '.join(caption.tokens)}   (class {pred})\n")

report = trainer.evaluate(ckpt, objects, frames)
print("training-set metrics:",
      {k: round(v, 3) for k, v in report.items()})
