"""MIMO sphere detection with learned search guidance.

Conventional Schnorr-Euchner sphere decoding, a Gaussian-RBF predictor of
per-sub-tree minimum path metrics, the prediction-aided detector built on
both, and a reproducible benchmark harness.
"""

from .channel import (ChannelInstance, Constellation, NotAConstellationPoint,
                      bits_diff, constellation_by_name, draw_channel_instance,
                      qpsk, snr_to_noise_variance, square_qam, zero_forcing_detect)
from .dpp import (DetectionResult, DetectorConfig, LambdaSchedule, NoSchedule,
                  baseline_config, default_lambda_schedule, dpp_detect,
                  early_termination_check, lambda_lookup, nn_initial_radius,
                  sorted_predictions)
from .numerics import OpCounter, QrFactors, RankDeficient, qrd
from .predictor import (DimensionMismatch, DivergedToNonFinite, FormatError,
                        RbfnModel, TrainerConfig, TrainingExample, TrainingReport,
                        extract_features, forward, gaussian_activation,
                        generate_dataset, load_dataset, load_model, predict,
                        save_dataset, save_model, train)
from .search import (SearchOutcome, SearchProblem, TooLarge, branch_metric,
                     conventional_radius, ml_oracle, reduced_problem,
                     se_child_order, sphere_decode, subtree_min_metric)
from .bench import (ExperimentSpec, RatioRow, ResultRow, SpecError, SweepInterrupted,
                    cmd_ber, cmd_complexity, cmd_gen_dataset, cmd_train,
                    complexity_ratios, csv_to_rows, rows_to_csv)

__version__ = "0.1.0"
