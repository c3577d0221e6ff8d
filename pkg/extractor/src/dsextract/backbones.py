"""Vision encoder registry.

A backbone turns a batch of standardized image tensors into one pooled
embedding row per image. Two encoders are registered:

- ``clip-vit-b32`` (default): the pretrained CLIP ViT-B/32 visual encoder,
  loaded through torch + transformers on first use. Needs the weights to be
  reachable (network or local cache); when they are not, construction fails
  with a clear error instead of a partial model.
- ``seeded-patch``: a weight-free stand-in that projects 32x32 patches
  through a fixed seeded random matrix, applies tanh, and mean-pools the
  patch tokens. Fully offline and deterministic. Its embeddings carry no
  learned semantics; it exists so the export pipeline can be exercised and
  validated end to end without downloadable weights.

Every encoder documents its pooling choice in ``info``; the extraction
manifest copies it next to the output file rather than claiming one true
reading of "the" pooled representation.
"""

from dataclasses import dataclass

import numpy as np


class BackboneUnavailableError(RuntimeError):
    """The encoder implementation or its weights cannot be loaded here."""


@dataclass(frozen=True)
class BackboneInfo:
    identifier: str
    d_emb: int
    pooling: str
    weights: str


class SeededPatchEncoder:
    """Random-feature patch encoder with fixed seeded weights."""

    IDENTIFIER = "seeded-patch"
    D_EMB = 512
    PATCH = 32
    _WEIGHT_SEED = 1

    def __init__(self) -> None:
        n_in = 3 * self.PATCH * self.PATCH
        rng = np.random.default_rng(np.random.SeedSequence(self._WEIGHT_SEED))
        scale = np.float32(1.0 / np.sqrt(n_in))
        self.weight = (rng.standard_normal((n_in, self.D_EMB)).astype(np.float32)) * scale

    def info(self) -> BackboneInfo:
        return BackboneInfo(
            identifier=self.IDENTIFIER,
            d_emb=self.D_EMB,
            pooling="mean over tanh-activated 32x32 patch projections",
            weights=f"random features, fixed seed {self._WEIGHT_SEED} (not trained)",
        )

    def encode(self, batch: np.ndarray) -> np.ndarray:
        n, c, h, w = batch.shape
        grid = h // self.PATCH
        patches = batch.reshape(n, c, grid, self.PATCH, grid, self.PATCH)
        tokens = patches.transpose(0, 2, 4, 1, 3, 5).reshape(n, grid * grid, -1)
        features = np.tanh(tokens @ self.weight)
        return features.mean(axis=1).astype(np.float32)


class ClipVisionEncoder:
    """Pretrained CLIP ViT-B/32 visual encoder (pooled class token)."""

    IDENTIFIER = "clip-vit-b32"
    WEIGHTS_ID = "openai/clip-vit-base-patch32"
    D_EMB = 768

    def __init__(self) -> None:
        try:
            import torch
            from transformers import CLIPVisionModel
        except ImportError as exc:
            raise BackboneUnavailableError(
                f"{self.IDENTIFIER} needs torch and transformers installed "
                f"(pip install 'dse-extract[clip]'): {exc}"
            ) from exc
        try:
            model = CLIPVisionModel.from_pretrained(self.WEIGHTS_ID)
        except Exception as exc:
            raise BackboneUnavailableError(
                f"cannot obtain weights {self.WEIGHTS_ID!r} for {self.IDENTIFIER} "
                f"(no network or cache): {exc}"
            ) from exc
        model.eval()
        self._torch = torch
        self._model = model

    def info(self) -> BackboneInfo:
        return BackboneInfo(
            identifier=self.IDENTIFIER,
            d_emb=self.D_EMB,
            pooling="layer-normalized class token (pooler_output), pre-projection",
            weights=self.WEIGHTS_ID,
        )

    def encode(self, batch: np.ndarray) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            pixels = torch.from_numpy(np.ascontiguousarray(batch, dtype=np.float32))
            pooled = self._model(pixel_values=pixels).pooler_output
        return pooled.cpu().numpy().astype(np.float32)


DEFAULT_BACKBONE = ClipVisionEncoder.IDENTIFIER

_REGISTRY = {
    ClipVisionEncoder.IDENTIFIER: ClipVisionEncoder,
    SeededPatchEncoder.IDENTIFIER: SeededPatchEncoder,
}


def backbone_identifiers() -> list[str]:
    return sorted(_REGISTRY)


def create_backbone(identifier: str):
    try:
        factory = _REGISTRY[identifier]
    except KeyError:
        known = ", ".join(backbone_identifiers())
        raise ValueError(f"unknown backbone {identifier!r} (known: {known})") from None
    return factory()
