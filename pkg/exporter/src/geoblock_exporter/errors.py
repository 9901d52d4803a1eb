class ExporterError(Exception):
    """Base class for exporter failures."""


class CapabilityError(ExporterError):
    """The model cannot provide what the session asks for (attention, layer ids)."""


class ExportError(ExporterError):
    """Captured data is inconsistent with the export configuration."""
