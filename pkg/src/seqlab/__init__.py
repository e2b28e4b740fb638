"""Sequential-label training for audio event detection at desk scale.

Losses (CTC over a boundary-symbol alphabet, blank-free CTL), converters
between strong/sequential/weak label forms, segment- and event-based
F-scores, a synthetic data generator with annotator timestamp noise, and
supervised / scheduled mean-teacher training harnesses.
"""

from .backend import BACKEND
from .common import LossResult
from .errors import (InfeasibleTargetError, ParseError, SeqlabError,
                     ValidationError)
from .labels import (BoundaryKind, BoundarySymbol, Event, EventClass,
                     FrameActivity, SequentialLabel, StrongAnnotation,
                     Vocabulary, WeakLabel, rasterize, read_annotations,
                     strong_to_sequential, strong_to_weak, write_annotations)
from .ctc import (CtcPosteriorgram, ctc_greedy_decode, ctc_greedy_decode_timed,
                  ctc_loss, ctc_threshold_decode_timed)
from .ctl import (BoundaryProbs, Posteriorgram, boundary_emission_prob,
                  ctl_decode, ctl_decode_timed, ctl_loss, no_boundary_prob,
                  rectified_delta)
from .metrics import (ClipResult, FScoreReport, event_fscore,
                      peak_cluster_score, posteriors_to_events,
                      segment_fscore, timed_boundaries_to_annotation)
from .model import ToyModel
from .trainer import (LossWeights, TrainConfig, combined_loss, strong_loss,
                      train, weak_loss)
from .meanteacher import (MeanTeacherConfig, consistency_losses, ema_update,
                          rampup_weight, train_semisupervised)
from .datagen import GenSpec, SyntheticClip, generate, jitter

__version__ = "0.1.0"
