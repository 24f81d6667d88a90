"""Qunity: a quantum programming language with a unified classical/quantum syntax.

Modules, in pipeline order:

* :mod:`qunity.parser` and :mod:`qunity.expand`: surface syntax to base terms.
* :mod:`qunity.typecheck`: typing derivations for the four judgment forms.
* :mod:`qunity.semantics`: Kraus operators and superoperators of derivations.
* :mod:`qunity.classical`: the interpreter for the classical sublanguage.
* :mod:`qunity.compiler`: lowering to qubit circuits, and checking the result.
* :mod:`qunity.cli`: the ``qunity`` command.
"""

from .compiler import compile_derivation, compile_term, verify
from .expand import expand, expand_text
from .parser import parse
from .semantics import denote
from .typecheck import infer

__version__ = "0.1.0"

__all__ = ["parse", "expand", "expand_text", "infer", "denote", "compile_term",
           "compile_derivation", "verify", "__version__"]
