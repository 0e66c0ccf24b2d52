"""Train the small U-Net on planted scenes and predict a full raster.

Uses a deliberately small setup (two training scenes, a few epochs) so the
script finishes in about a minute on a laptop CPU.
"""

from bandopt import (SceneSpec, UNet, UNetConfig, build_dataset, full_mask,
                     generate_scene, predict_raster, dice_coefficient, train)

BANDS = 6
spec = dict(height=224, width=224, bands=BANDS, informative=(0, 2, 5))
train_rasters = [generate_scene(SceneSpec(seed=s, **spec)) for s in range(2)]
test_rasters = [generate_scene(SceneSpec(seed=99, **spec))]
dataset = build_dataset(train_rasters, test_rasters, tile_size=32)
print(f"dataset: {len(dataset.train_tiles)} training tiles of "
      f"32x32x{BANDS}, {len(dataset.test_rasters)} test raster")

model = UNet(UNetConfig(in_channels=BANDS, base_filters=8, depth=2, seed=0))
model.band_mask = full_mask(BANDS)
model, report = train(model, dataset, epochs=14, batch_size=32, seed=0, lr=0.01)

print("\nepoch losses:", " ".join(f"{l:.3f}" for l in report.epoch_losses))
print(f"test Dice: {report.final_test_dice:.4f}  "
      f"({report.seconds:.1f}s, {model.parameter_count()} parameters)")

prob = predict_raster(model, test_rasters[0], tile_size=32)
dice = dice_coefficient(prob > 0.5, test_rasters[0].mask)
print(f"tiled whole-raster prediction: map {prob.shape}, Dice {dice:.4f}")
