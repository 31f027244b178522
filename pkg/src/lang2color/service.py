"""HTTP service exposing colorization and caption manipulation.

Endpoints:

* ``POST /colorize``   - greyscale-or-color image + caption -> colorized PNG
* ``POST /manipulate`` - image + caption + color words -> one PNG per word
* ``GET /health``      - model identity and fusion mode
* ``GET /lexicon``     - the color words and their canonical ab pairs

Request and response images travel as base64 PNG. The model is loaded
once at startup and never mutated, so identical requests produce
byte-identical responses and concurrent handling is safe.
"""

import base64
import io
import logging
import time
import uuid

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from PIL import Image
from pydantic import BaseModel, Field

from .evaluation import activation_heatmap
from .kernels import bilinear_resize
from .inference import (
    DEFAULT_HEATMAP_BLOCKS,
    ModelBundle,
    network_lightness,
    predict_ab,
    resize_prediction,
)
from .text import swap_color_word
from . import colorspace

log = logging.getLogger("lang2color.service")

MAX_DECODED_BYTES = 16 * 1024 * 1024
MAX_CAPTION_CHARS = 512


class ColorizeRequest(BaseModel):
    image: str
    caption: str = Field(default="", max_length=MAX_CAPTION_CHARS)
    return_heatmaps: bool = False
    blocks: list[int] = Field(default_factory=lambda: list(DEFAULT_HEATMAP_BLOCKS))


class ManipulateRequest(BaseModel):
    image: str
    base_caption: str = Field(max_length=MAX_CAPTION_CHARS)
    words: list[str]
    mask: str | None = None


class ServiceError(Exception):
    def __init__(self, status: int, message: str):
        super().__init__(message)
        self.status = status
        self.message = message


def _decode_image(b64: str) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
    except Exception as exc:
        raise ServiceError(400, f"image is not valid base64: {exc}") from exc
    try:
        img = Image.open(io.BytesIO(raw))
        w, h = img.size
        if w * h * 3 > MAX_DECODED_BYTES:
            raise ServiceError(413, f"decoded image {w}x{h} exceeds the 16 MB limit")
        return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except ServiceError:
        raise
    except Exception as exc:
        raise ServiceError(400, f"image cannot be decoded: {exc}") from exc


def _encode_png(arr: np.ndarray, mode: str = "RGB") -> str:
    buf = io.BytesIO()
    Image.fromarray(arr, mode=mode).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def create_app(bundle: ModelBundle, studio_dir=None) -> FastAPI:
    app = FastAPI(title="lang2color", version="0.1.0")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        details = [
            {"field": ".".join(str(p) for p in err["loc"]), "message": err["msg"]}
            for err in exc.errors()
        ]
        return JSONResponse(status_code=400, content={"errors": details})

    @app.exception_handler(ServiceError)
    async def on_service_error(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status, content={"error": exc.message})

    @app.exception_handler(Exception)
    async def on_internal_error(request: Request, exc: Exception):
        error_id = uuid.uuid4().hex[:12]
        log.exception("internal error %s on %s", error_id, request.url.path)
        return JSONResponse(
            status_code=500, content={"error": "internal error", "id": error_id}
        )

    @app.middleware("http")
    async def request_log(request: Request, call_next):
        started = time.perf_counter()
        response = await call_next(request)
        log.info(
            "%s %s -> %d (%.1f ms)",
            request.method,
            request.url.path,
            response.status_code,
            (time.perf_counter() - started) * 1e3,
        )
        return response

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "model_id": bundle.model_id,
            "fusion_mode": bundle.fusion_mode,
        }

    @app.get("/lexicon")
    def lexicon():
        return {
            "words": bundle.lexicon.words,
            "canonical_ab": bundle.lexicon.to_dict(),
        }

    @app.post("/colorize")
    def colorize(req: ColorizeRequest):
        started = time.perf_counter()
        rgb = _decode_image(req.image)
        lab_full = colorspace.rgb_to_lab(rgb)
        lightness = network_lightness(rgb, bundle.net_config.input_size)
        capture = tuple(req.blocks) if req.return_heatmaps else ()
        if bundle.fusion_mode != "none":
            ab_small, features = predict_ab(bundle, lightness, req.caption, capture)
        else:
            ab_small, features = predict_ab(bundle, lightness, None, capture)
        ab_full = resize_prediction(ab_small, rgb.shape[:2])
        ab_full = colorspace.fit_ab_to_gamut(lab_full[..., 0], ab_full)
        out = colorspace.lab_to_rgb(colorspace.merge_lab(lab_full[..., 0], ab_full))
        heatmaps = None
        if req.return_heatmaps:
            heatmaps = {
                str(n): _encode_png(activation_heatmap(feat), mode="L")
                for n, feat in features.items()
            }
        return {
            "image": _encode_png(out),
            "heatmaps": heatmaps,
            "timing_ms": (time.perf_counter() - started) * 1e3,
        }

    @app.post("/manipulate")
    def manipulate(req: ManipulateRequest):
        if bundle.fusion_mode == "none":
            raise ServiceError(400, "this checkpoint is language-agnostic")
        words = list(dict.fromkeys(req.words))
        if len(words) < 2:
            raise ServiceError(400, "need at least two distinct color words")
        unknown = [w for w in words if w not in bundle.lexicon]
        if unknown:
            raise ServiceError(400, f"words not in the lexicon: {unknown}")
        rgb = _decode_image(req.image)
        lab_full = colorspace.rgb_to_lab(rgb)
        lightness = network_lightness(rgb, bundle.net_config.input_size)

        mask_small = None
        if req.mask is not None:
            mask_rgb = _decode_image(req.mask)
            mask_full = mask_rgb.mean(axis=-1) > 127
            out_size = bundle.net_config.output_size
            mask_small = (
                bilinear_resize(
                    np.ascontiguousarray(mask_full[None].astype(np.float64)),
                    out_size,
                    out_size,
                )[0]
                >= 0.5
            )

        variants = []
        for word in words:
            caption = swap_color_word(req.base_caption, word, bundle.lexicon).text
            ab_small, _ = predict_ab(bundle, lightness, caption)
            ab_full = resize_prediction(ab_small, rgb.shape[:2])
            ab_full = colorspace.fit_ab_to_gamut(lab_full[..., 0], ab_full)
            out = colorspace.lab_to_rgb(colorspace.merge_lab(lab_full[..., 0], ab_full))
            entry = {"word": word, "caption": caption, "image": _encode_png(out)}
            if mask_small is not None and mask_small.any():
                mean_ab = ab_small[mask_small].mean(axis=0)
                entry["region_mean_ab"] = [float(v) for v in mean_ab]
            variants.append(entry)
        return {"variants": variants}

    if studio_dir:
        app.mount("/studio", StaticFiles(directory=str(studio_dir), html=True), name="studio")

    return app
