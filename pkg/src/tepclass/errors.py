"""Exception hierarchy.

Every error carries the pipeline stage it originated from so the CLI can
report ``<stage>: <message>`` and exit nonzero.
"""


class TepError(Exception):
    stage = "tepclass"

    def __str__(self):
        return f"{self.stage}: {super().__str__()}"


class FormatError(TepError):
    stage = "io"


class ManifestError(TepError):
    stage = "manifest"


class PreprocessError(TepError):
    stage = "preprocess"


class MontageError(TepError):
    stage = "montage"


class FeatureError(TepError):
    stage = "features"


class ClassifierError(TepError):
    stage = "classify"


class EvaluationError(TepError):
    stage = "evaluate"


class SynthError(TepError):
    stage = "synth"


class ConfigError(TepError):
    stage = "config"
