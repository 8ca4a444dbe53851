"""On-disk artifacts: checksummed containers, checkpoints and run manifests."""
