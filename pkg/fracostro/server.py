import logging
import os

import dotenv
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from fracostro._config import parse_run_config
from fracostro._errors import FracError
from fracostro.cli import run_derive, run_kernel

dotenv.load_dotenv()

# Configure logging
logging.basicConfig(
    level=os.getenv("FRACOSTRO_LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
)
logger = logging.getLogger(__name__)

app = FastAPI()


@app.exception_handler(FracError)
async def frac_error_handler(request: Request, exc: FracError) -> JSONResponse:
    status_code = 422 if exc.exit_code == 4 else 400
    logger.info(f"{request.url.path} failed with {exc.kind}: {exc}")
    return JSONResponse(exc.json(), status_code=status_code)


@app.get("/api/health")
def health() -> JSONResponse:
    """Health check."""
    return JSONResponse({"status": "ok"})


@app.post("/api/derive")
def derive(body: dict) -> JSONResponse:
    """Euler-Lagrange expression, momenta and reduced Hamiltonian of a run config."""
    return JSONResponse(run_derive(parse_run_config(body)))


@app.post("/api/kernel")
def kernel(body: dict) -> JSONResponse:
    """Spectral report of a run config."""
    return JSONResponse(run_kernel(parse_run_config(body)))


if __name__ == "__main__":
    import uvicorn

    uvicorn.run("fracostro.server:app", host="127.0.0.1", port=5328, reload=True)
