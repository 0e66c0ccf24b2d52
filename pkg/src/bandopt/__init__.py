"""bandopt: band-selection strategies for multi-spectral segmentation.

A numpy library comparing four ways of feeding multi-band imagery to a small
segmentation CNN: a fixed expert band subset, all bands, learned channel
attention over the input, and Gaussian-process Bayesian optimisation over
binary band masks. Everything runs on CPU with hand-derived gradients.
"""

from .acquisition import (DomainExhausted, ei_closed_form, ei_monte_carlo,
                          erf_approx, norm_cdf, norm_pdf, propose_next)
from .bayesopt import BOResult, Observation, bayes_opt_loop, read_trace
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .experiment import (ConfigError, ExperimentConfig, ResultRow,
                         build_experiment_dataset, format_table, load_config,
                         parse_config, read_results, report, results_checksum,
                         run_compare, run_method, summarize, write_results)
from .gp import (CholeskyError, GPModel, gp_fit, gp_posterior,
                 gp_posterior_batch, kernel_matern52, kernel_matrix)
from .gradcheck import (GradCheckResult, central_difference,
                        finite_difference_check, gradient_suite)
from .losses import dice_coefficient, soft_iou_loss
from .masks import (as_band_mask, bits_to_mask, enumerate_masks, full_mask,
                    mask_from_indices, mask_key, mask_to_bits, popcount)
from .optim import AdamState, NonFiniteGradientError, adam_step
from .raster import (Raster, RasterFormatError, TileLayout, load_raster,
                     read_manifest, reconstruct, save_raster, tile,
                     write_manifest)
from .synth import (NormStats, RasterDataset, SceneSpec, apply_norm,
                    build_dataset, compute_norm_stats, generate_scene,
                    normalize_array, select_bands)
from .train import (TrainingError, TrainReport, evaluate_on_rasters,
                    predict_raster, train)
from .unet import UNet, UNetConfig, se_attention_backward, se_attention_forward

__version__ = "0.1.0"
