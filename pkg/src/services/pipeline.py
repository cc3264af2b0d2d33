import json
import threading
from collections import OrderedDict
from typing import Optional

from src.config.settings import get_config
from src.helper.loggers import api_logger
from src.models.containers import WaveletStack
from src.models.params import DiffusionParams, Metrics, ReconstructionMode, SoftThresholdMode, WaveletParams
from src.services import cakewavelet, fileio, lieops, oscore, phantoms, sphere


class OrientationScorePipeline:
    """File-to-file operations behind the HTTP endpoints, with a small LRU of wavelet stacks."""

    def __init__(self):
        self.settings = get_config().server
        self._stacks: "OrderedDict[str, WaveletStack]" = OrderedDict()
        # endpoints run on a thread pool; builds happen under the lock so a key is built once
        self._lock = threading.Lock()

    def wavelet_stack(self, order: int, params: WaveletParams) -> WaveletStack:
        key = json.dumps({"order": order, "params": params.model_dump(mode="json")}, sort_keys=True)
        with self._lock:
            if key in self._stacks:
                self._stacks.move_to_end(key)
                return self._stacks[key]
            orientation_set = sphere.icosphere(order)
            oscore.check_envelope(params.grid, len(orientation_set))
            stack = cakewavelet.build_wavelet_stack(orientation_set, params)
            self._stacks[key] = stack
            while len(self._stacks) > self.settings.stack_cache_size:
                self._stacks.popitem(last=False)
            return stack

    def mpsi_report(self, order: int, params: WaveletParams, fraction: float, bins: int) -> oscore.StabilityReport:
        try:
            return oscore.stability_report(self.wavelet_stack(order, params), fraction, bins)
        except Exception as e:
            api_logger.error(f"Error in mpsi_report: {str(e)}")
            raise

    def enhance_file(
        self,
        input_path: str,
        output_path: str,
        order: int,
        params: WaveletParams,
        diffusion: DiffusionParams,
        p: Optional[float] = None,
        reconstruction: ReconstructionMode = ReconstructionMode.APPROX,
    ) -> None:
        """Enhances the volume at input_path; the wavelet grid is taken from the volume."""
        try:
            v = fileio.read_volume(input_path)
            stack = self.wavelet_stack(order, params.model_copy(update={"grid": v.dims}))
            enhanced = lieops.enhance(v, stack, diffusion, p, reconstruction, None, SoftThresholdMode.PHASE)
            flags = {"order": order, "wavelets": params.model_dump(mode="json"),
                     "diffusion": diffusion.model_dump(mode="json"), "p": p, "recon": reconstruction.value}
            fileio.write_volume(output_path, enhanced, provenance=fileio.manifest("api-enhance", flags))
        except Exception as e:
            api_logger.error(f"Error in enhance_file: {str(e)}")
            raise

    def metrics_files(self, a_path: str, b_path: str) -> Metrics:
        try:
            return phantoms.metrics(fileio.read_volume(a_path), fileio.read_volume(b_path))
        except Exception as e:
            api_logger.error(f"Error in metrics_files: {str(e)}")
            raise
