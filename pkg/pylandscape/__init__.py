from .errors import *
from .types import *
from .linalg import *
from .model import *
from .propagate import *
from .landscape import *
from .gradients import *
from .diagnostics import *
from .optimizer import *
from .config import *
from .output import *
