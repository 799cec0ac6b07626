"""
Model Store Service.
Persists trained confidence models as JSON documents.
"""

import json
import logging
from pathlib import Path

from services.confidence import LinearModel
from services.errors import UnreadableFile
from services.utils import PathLike, write_json

# Configure logging
logger = logging.getLogger(__name__)


class ModelStore:
    """
    Reads and writes one model file.

    The document holds the schema version, feature mask, weights, bias,
    normalization stats, class weights, training config and the training-set
    fingerprint. Keys are sorted so identical models serialize identically.
    """

    def __init__(self, path: PathLike):
        """
        Args:
            path: Model JSON file
        """
        self.path = Path(path)

    def save(self, model: LinearModel) -> Path:
        """Write the model, creating parent directories."""
        try:
            write_json(self.path, model.to_dict())
        except OSError as e:
            logger.error(f"Failed to save model file: {str(e)}", exc_info=True)
            raise
        logger.info(f"Saved model to {self.path} (fingerprint {model.fingerprint[:12]})")
        return self.path

    def load(self) -> LinearModel:
        """
        Load the model.

        Raises:
            UnreadableFile: If the file is missing or not JSON
            ValueError: If the document does not describe a model
        """
        if not self.path.is_file():
            raise UnreadableFile(f"Model file not found: {self.path}")
        try:
            with open(self.path, "r", encoding="utf-8-sig") as f:
                data = json.load(f)
        except (OSError, UnicodeDecodeError, json.JSONDecodeError) as e:
            raise UnreadableFile(f"Cannot read model file {self.path}: {e}") from e

        if not isinstance(data, dict):
            raise ValueError(f"Model file {self.path} does not hold a JSON object")
        model = LinearModel.from_dict(data)
        logger.info(f"Loaded model from {self.path} (features: {', '.join(model.feature_names)})")
        return model
