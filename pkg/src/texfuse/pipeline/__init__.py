"""Dataset manifests, specimen splits, cached extraction and the evaluation protocol."""
