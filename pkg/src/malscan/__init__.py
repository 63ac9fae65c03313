"""malscan: component-wise code security scanning.

Source files are split into functions, classes and methods, triaged with
static indicator rules scored through CVSS v3.1, and the risky components
are handed to an analysis backend (a chat-completion model or a
deterministic rule engine) that produces findings with exploit traces and
remediation advice.
"""

__version__ = "0.1.0"
