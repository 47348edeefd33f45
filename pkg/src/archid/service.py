"""HTTP prediction endpoint.

POST /binary/ accepts a multipart form with a "binary" file field and an
"api_key" text field and answers with the predicted architecture,
endianness, word size and the probability of the predicted class:

    {"prediction": {"architecture": ..., "endianness": ..., "wordsize": ...},
     "prediction_probability": ...}

The whole uploaded blob is featurized by default; a "mode" field of
"code_only" parses it as ELF and featurizes only executable sections.
"""

from __future__ import annotations

import hmac
import logging

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from . import classifiers, features
from .binfmt import ARCHITECTURES, BinaryImage, concat_code
from .errors import DataError

log = logging.getLogger(__name__)

DEFAULT_MAX_UPLOAD = 64 * 1024 * 1024


def create_app(
    model: classifiers.TrainedModel,
    api_key: str,
    max_upload_bytes: int = DEFAULT_MAX_UPLOAD,
    default_mode: str = "complete_binary",
) -> FastAPI:
    app = FastAPI(title="archid", docs_url=None, redoc_url=None)

    def _error(status: int, message: str) -> JSONResponse:
        return JSONResponse(status_code=status, content={"error": message})

    async def classify(request: Request):
        length = request.headers.get("content-length")
        if length is not None and length.isdigit() and int(length) > max_upload_bytes:
            return _error(413, "payload too large")

        try:
            form = await request.form()
        except Exception:
            return _error(400, "malformed multipart body")

        supplied_key = form.get("api_key")
        if not isinstance(supplied_key, str) or not hmac.compare_digest(
            supplied_key.encode(), api_key.encode()
        ):
            return _error(401, "invalid api_key")

        part = form.get("binary")
        if part is None:
            return _error(400, "missing 'binary' field")
        if isinstance(part, str):
            data = part.encode()
        else:
            data = await part.read()
        if not data:
            return _error(400, "empty 'binary' payload")
        if len(data) > max_upload_bytes:
            return _error(413, "payload too large")

        mode = form.get("mode") or default_mode
        try:
            if mode == "code_only":
                data = concat_code(BinaryImage(raw_bytes=data, source_path="<upload>"))
            vector = features.extract_features(data)
            prediction = classifiers.predict(model, vector)
        except DataError as exc:
            return _error(400, str(exc))
        except Exception:
            log.exception("prediction failed")
            return _error(500, "internal error")

        name = prediction.label
        if name not in ARCHITECTURES:
            log.error("model produced unknown architecture label %r", name)
            return _error(500, "internal error")
        endianness, wordsize = ARCHITECTURES[name]
        return JSONResponse(
            status_code=200,
            content={
                "prediction": {
                    "architecture": name,
                    "endianness": endianness,
                    "wordsize": wordsize,
                },
                "prediction_probability": prediction.probabilities[name],
            },
        )

    # Registered twice: clients use the trailing-slash form, keep the
    # bare one as an alias rather than a redirect.
    app.post("/binary/")(classify)
    app.post("/binary")(classify)

    @app.get("/health")
    def health():
        return {
            "status": "ok",
            "model_family": model.family,
            "schema_version": model.schema_version,
        }

    return app


def serve(model_path, host: str, port: int, api_key: str,
          max_upload_bytes: int = DEFAULT_MAX_UPLOAD,
          default_mode: str = "complete_binary") -> None:
    import uvicorn

    from . import modelstore

    model = modelstore.load_model(model_path)
    app = create_app(model, api_key=api_key,
                     max_upload_bytes=max_upload_bytes, default_mode=default_mode)
    uvicorn.run(app, host=host, port=port, log_level="info")
