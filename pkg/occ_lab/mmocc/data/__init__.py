from .dataset import (
	SamplePair, OccTask, MANIFEST_FIELDS,
	load_dataset, export_dataset, build_task, stack_pairs, class_ids,
)
from .image_utils import read_image, write_ppm, preprocess_image, to_uint8_image
from .synthetic import synth_generate, square_position
