"""Learned joint source-channel coding of images into DNA base sequences."""

from .bio import BioReport, bio_report, gc_content, run_stats, validate
from .channel import ChannelConfig, Strand, apply_ids, pcr_amplify, recombine, segment, transmit
from .data import TileGrid, load_cifar10, normalize, reassemble, tile_image
from .estimator import DNAImageCodec
from .metrics import psnr, ssim
from .network import CodecNet, decode, encode, merge_copies, nucleotide_map
from .objective import LossWeights, constraint_profile, l_bc, l_rq, target_values, total_loss, window_starts
from .preprocess import compute_K, pad_and_map
from .training import TrainConfig, load_checkpoint, lr_schedule, save_checkpoint, train_step

__version__ = "0.1.0"
