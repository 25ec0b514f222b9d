"""Stochastic augmentation policies.

A policy is an ordered list of transform specs. Every random draw comes
from an explicit ``torch.Generator``, so equal generator states give
bitwise-equal outputs. Pixel-value transforms that need [0, 1] input
(color jitter, grayscale) de-normalize, transform and re-normalize.
"""

import math
from dataclasses import dataclass
from typing import Annotated, ClassVar, Literal

import torch
from pydantic import BaseModel, ConfigDict, Field
from torchvision.transforms import functional as TF

from sslprobe.config import PIXEL_MEAN, PIXEL_STD
from sslprobe.errors import PolicyError

TRANSFORM_ORDER = ("crop", "flip", "color", "grayscale", "blur", "erase")


def _uniform(generator: torch.Generator, low: float, high: float) -> float:
    u = torch.rand(1, generator=generator, dtype=torch.float64).item()
    return low + (high - low) * u


def _randint(generator: torch.Generator, low: int, high: int) -> int:
    """Integer in [low, high]."""
    return int(torch.randint(low, high + 1, (1,), generator=generator).item())


class _Spec(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    geometric: ClassVar[bool] = False

    p: float = Field(1.0, ge=0.0, le=1.0)

    def check(self) -> None:
        pass

    def fires(self, generator: torch.Generator) -> bool:
        # Always consume one draw so later transforms see the same stream.
        return torch.rand(1, generator=generator).item() < self.p

    def apply(self, image: torch.Tensor, generator: torch.Generator, mean: float, std: float) -> torch.Tensor:
        raise NotImplementedError


class RandomResizedCropSpec(_Spec):
    geometric: ClassVar[bool] = True

    kind: Literal["crop"] = "crop"
    scale: tuple[float, float] = (0.08, 1.0)
    ratio: tuple[float, float] = (3 / 4, 4 / 3)

    def check(self) -> None:
        lo, hi = self.scale
        if hi < lo:
            raise PolicyError(f"Crop scale range {self.scale} is degenerate (max < min)")
        if lo <= 0.0 or hi > 1.0:
            raise PolicyError(f"Crop scale range {self.scale} must lie in (0, 1]")
        if self.ratio[1] < self.ratio[0] or self.ratio[0] <= 0:
            raise PolicyError(f"Crop aspect range {self.ratio} is invalid")

    def _window(self, height: int, width: int, generator: torch.Generator) -> tuple[int, int, int, int]:
        area = height * width
        log_lo, log_hi = math.log(self.ratio[0]), math.log(self.ratio[1])
        for _ in range(10):
            target = area * _uniform(generator, *self.scale)
            aspect = math.exp(_uniform(generator, log_lo, log_hi))
            w = round(math.sqrt(target * aspect))
            h = round(math.sqrt(target / aspect))
            if 0 < w <= width and 0 < h <= height:
                top = _randint(generator, 0, height - h)
                left = _randint(generator, 0, width - w)
                return top, left, h, w
        # Fallback: central crop clamped to the aspect range.
        in_ratio = width / height
        if in_ratio < self.ratio[0]:
            w, h = width, round(width / self.ratio[0])
        elif in_ratio > self.ratio[1]:
            h, w = height, round(height * self.ratio[1])
        else:
            w, h = width, height
        return (height - h) // 2, (width - w) // 2, h, w

    def apply(self, image, generator, mean, std):
        _, height, width = image.shape
        top, left, h, w = self._window(height, width, generator)
        if (top, left, h, w) == (0, 0, height, width):
            return image
        return TF.resized_crop(image, top, left, h, w, [height, width], antialias=True)


class HorizontalFlipSpec(_Spec):
    geometric: ClassVar[bool] = True

    kind: Literal["flip"] = "flip"
    p: float = Field(0.5, ge=0.0, le=1.0)

    def apply(self, image, generator, mean, std):
        return TF.hflip(image)


class ColorJitterSpec(_Spec):
    kind: Literal["color"] = "color"
    p: float = Field(0.8, ge=0.0, le=1.0)
    strength: float = Field(0.8, ge=0.0)

    def apply(self, image, generator, mean, std):
        s = self.strength
        brightness = _uniform(generator, max(0.0, 1 - 0.8 * s), 1 + 0.8 * s)
        contrast = _uniform(generator, max(0.0, 1 - 0.8 * s), 1 + 0.8 * s)
        saturation = _uniform(generator, max(0.0, 1 - 0.8 * s), 1 + 0.8 * s)
        hue = _uniform(generator, -min(0.5, 0.2 * s), min(0.5, 0.2 * s))
        pixels = (image * std + mean).clamp(0.0, 1.0)
        for op in torch.randperm(4, generator=generator).tolist():
            if op == 0:
                pixels = TF.adjust_brightness(pixels, brightness)
            elif op == 1:
                pixels = TF.adjust_contrast(pixels, contrast)
            elif op == 2:
                pixels = TF.adjust_saturation(pixels, saturation)
            else:
                pixels = TF.adjust_hue(pixels, hue)
        return (pixels - mean) / std


class GrayscaleSpec(_Spec):
    kind: Literal["grayscale"] = "grayscale"
    p: float = Field(0.2, ge=0.0, le=1.0)

    def apply(self, image, generator, mean, std):
        pixels = (image * std + mean).clamp(0.0, 1.0)
        return (TF.rgb_to_grayscale(pixels, num_output_channels=3) - mean) / std


class GaussianBlurSpec(_Spec):
    kind: Literal["blur"] = "blur"
    p: float = Field(0.5, ge=0.0, le=1.0)
    sigma: tuple[float, float] = (0.1, 2.0)
    kernel_size: int = 23

    def check(self) -> None:
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise PolicyError(f"Blur kernel size must be a positive odd integer, got {self.kernel_size}")
        if not 0 < self.sigma[0] <= self.sigma[1]:
            raise PolicyError(f"Blur sigma range {self.sigma} is invalid")

    def apply(self, image, generator, mean, std):
        sigma = _uniform(generator, *self.sigma)
        k = min(self.kernel_size, 2 * (min(image.shape[-2:]) // 2) - 1)
        return TF.gaussian_blur(image, [k, k], [sigma, sigma])


class RandomErasingSpec(_Spec):
    kind: Literal["erase"] = "erase"
    p: float = Field(0.25, ge=0.0, le=1.0)
    area: tuple[float, float] = (0.02, 0.2)
    ratio: tuple[float, float] = (0.3, 3.3)
    value: float = 0.0

    def check(self) -> None:
        if not 0 < self.area[0] <= self.area[1] < 1:
            raise PolicyError(f"Erase area range {self.area} is invalid")
        if not 0 < self.ratio[0] <= self.ratio[1]:
            raise PolicyError(f"Erase aspect range {self.ratio} is invalid")

    def apply(self, image, generator, mean, std):
        _, height, width = image.shape
        log_lo, log_hi = math.log(self.ratio[0]), math.log(self.ratio[1])
        for _ in range(10):
            target = height * width * _uniform(generator, *self.area)
            aspect = math.exp(_uniform(generator, log_lo, log_hi))
            h = round(math.sqrt(target * aspect))
            w = round(math.sqrt(target / aspect))
            if 0 < h < height and 0 < w < width:
                top = _randint(generator, 0, height - h)
                left = _randint(generator, 0, width - w)
                return TF.erase(image, top, left, h, w, torch.tensor(self.value, dtype=image.dtype))
        return image


TransformSpec = Annotated[
    RandomResizedCropSpec
    | HorizontalFlipSpec
    | ColorJitterSpec
    | GrayscaleSpec
    | GaussianBlurSpec
    | RandomErasingSpec,
    Field(discriminator="kind"),
]


class AugmentationPolicy(BaseModel):
    model_config = ConfigDict(extra="forbid")

    transforms: list[TransformSpec] = Field(default_factory=list)
    mean: float = PIXEL_MEAN
    std: float = Field(PIXEL_STD, gt=0.0)

    @classmethod
    def ssl_default(cls) -> "AugmentationPolicy":
        return cls(
            transforms=[
                RandomResizedCropSpec(),
                HorizontalFlipSpec(),
                ColorJitterSpec(),
                GrayscaleSpec(),
                GaussianBlurSpec(),
                RandomErasingSpec(),
            ]
        )

    @classmethod
    def detector_default(cls) -> "AugmentationPolicy":
        return cls(transforms=[GrayscaleSpec(), GaussianBlurSpec(), RandomErasingSpec()])

    @property
    def is_empty(self) -> bool:
        return not self.transforms

    def validate_ssl(self) -> None:
        positions = [TRANSFORM_ORDER.index(t.kind) for t in self.transforms]
        if positions != sorted(positions):
            raise PolicyError(
                f"Transforms must follow the order {TRANSFORM_ORDER}, got {[t.kind for t in self.transforms]}"
            )
        lo, hi = -self.mean / self.std, (1 - self.mean) / self.std
        for t in self.transforms:
            t.check()
            if isinstance(t, RandomErasingSpec) and not lo <= t.value <= hi:
                raise PolicyError(f"Erase value {t.value} is outside the normalized range [{lo}, {hi}]")

    def validate_detector(self) -> None:
        geometric = [t.kind for t in self.transforms if t.geometric]
        if geometric:
            raise PolicyError(
                f"Detector policies may only change pixel values; geometric transforms {geometric} "
                "would invalidate the ground-truth box"
            )
        self.validate_ssl()

    def apply(self, image: torch.Tensor, generator: torch.Generator) -> torch.Tensor:
        for t in self.transforms:
            if t.fires(generator):
                image = t.apply(image, generator, self.mean, self.std)
        return image


@dataclass(frozen=True)
class ViewPair:
    view_a: torch.Tensor
    view_b: torch.Tensor


def ssl_view_pair(image: torch.Tensor, policy: AugmentationPolicy, generator: torch.Generator) -> ViewPair:
    """Two independent draws of ``policy`` on the same source image."""
    policy.validate_ssl()
    view_a = policy.apply(image, generator)
    view_b = policy.apply(image, generator)
    return ViewPair(view_a, view_b)


def detector_augment(image: torch.Tensor, policy: AugmentationPolicy, generator: torch.Generator) -> torch.Tensor:
    """Pixel-value augmentation for detector training; the box is untouched."""
    policy.validate_detector()
    return policy.apply(image, generator)
