"""Model-mode backends: image-text scoring and clip feature extraction.

Model loading is lazy and failure maps to ModelUnavailable so the CLI can
advise stub mode.  The vocabulary softmax lives here as a pure function;
likelihoods are comparative across the prompted vocabulary.
"""

from __future__ import annotations

import logging

import numpy as np

from .errors import ModelUnavailable

log = logging.getLogger(__name__)

DEFAULT_PROMPT = "a photo of a {concept}"
CLIP_NAME = "openai/clip-vit-base-patch32"
FEATURE_DIM = 1024


def vocabulary_softmax(logits: np.ndarray) -> np.ndarray:
    """Probabilities over the prompted vocabulary; sums to 1 per frame."""
    logits = np.asarray(logits, dtype=np.float64)
    shifted = logits - logits.max(axis=-1, keepdims=True)
    weights = np.exp(shifted)
    return weights / weights.sum(axis=-1, keepdims=True)


def render_prompts(vocabulary: list[str], template: str = DEFAULT_PROMPT) -> list[str]:
    return [template.format(concept=c.replace("_", " ")) for c in vocabulary]


def load_image_text_model(name: str = CLIP_NAME):
    """Load the image-text scorer; raises ModelUnavailable on any failure."""
    try:
        import torch  # noqa: F401
        from transformers import CLIPModel, CLIPProcessor
    except ImportError as err:
        raise ModelUnavailable(f"image-text model stack not importable: {err}") from None
    try:
        model = CLIPModel.from_pretrained(name)
        processor = CLIPProcessor.from_pretrained(name)
    except Exception as err:  # noqa: BLE001 - hub/network/weights failures
        raise ModelUnavailable(f"could not load {name}: {err}") from None
    model.eval()
    return model, processor


def score_frame(model_bundle, image: np.ndarray, prompts: list[str]) -> np.ndarray:
    """Raw image-text logits for one frame over the prompt list."""
    import torch

    model, processor = model_bundle
    inputs = processor(text=prompts, images=image, return_tensors="pt", padding=True)
    with torch.no_grad():
        out = model(**inputs)
    return out.logits_per_image[0].numpy()


def load_video_feature_model():
    """Load the video feature extractor; raises ModelUnavailable on failure."""
    try:
        import torch  # noqa: F401
        from torchvision.models.video import S3D_Weights, s3d
    except ImportError as err:
        raise ModelUnavailable(f"video model stack not importable: {err}") from None
    try:
        model = s3d(weights=S3D_Weights.DEFAULT)
    except Exception as err:  # noqa: BLE001
        raise ModelUnavailable(f"could not load pretrained video weights: {err}") from None
    model.eval()
    return model


def extract_clip_feature(model, frames: list[np.ndarray]) -> np.ndarray:
    """Mean-pooled penultimate activations for a stack of RGB frames."""
    import torch

    stack = np.stack(frames).astype(np.float32) / 255.0  # T,H,W,C
    tensor = torch.from_numpy(stack).permute(3, 0, 1, 2).unsqueeze(0)  # 1,C,T,H,W
    with torch.no_grad():
        feats = model.features(tensor)
        pooled = feats.mean(dim=(2, 3, 4))[0]
    return pooled.numpy()
