"""Exception hierarchy shared by every module.

All errors raised on bad input derive from :class:`PseudoNotesError` so the
command-line front end can map them to exit code 1 in one place.
"""


class PseudoNotesError(Exception):
    """Base class for domain errors."""


# contour / envelope CSV
class ContourError(PseudoNotesError):
    pass


class MalformedRow(ContourError):
    pass


class NonUniformHop(ContourError):
    pass


class EmptyInput(ContourError):
    pass


class RangeViolation(ContourError):
    pass


# notes JSON / MIDI
class NotesFormatError(PseudoNotesError):
    pass


class MidiFormatError(PseudoNotesError):
    pass


# tempo
class TempoError(PseudoNotesError):
    pass


class EnvelopeTooShort(TempoError):
    pass


class DegenerateEnvelope(TempoError):
    pass


# quantizer
class HopMismatch(PseudoNotesError):
    pass


# eval
class EmptyCorpus(PseudoNotesError):
    pass


# selftrain
class SelfTrainError(PseudoNotesError):
    pass


class CommandFailed(SelfTrainError):
    def __init__(self, argv, returncode, stderr=""):
        self.argv = list(argv)
        self.returncode = returncode
        self.stderr = stderr
        tail = stderr.strip().splitlines()[-5:]
        msg = f"command exited with status {returncode}: {' '.join(self.argv)}"
        if tail:
            msg += "\n" + "\n".join(tail)
        super().__init__(msg)


class SchemaViolation(SelfTrainError):
    pass


class MissingInput(SelfTrainError):
    pass


class StaleManifest(SelfTrainError):
    pass


class AugmenterRequired(SelfTrainError):
    pass


class TemplateError(SelfTrainError):
    pass
