from mcore.core.engine import Engine, EngineConfig
from mcore.core.events import Exit, Terminate
from mcore.core.state import Context, State
from mcore.native.asm import assemble
from mcore.native.cpu import MiniVM, load_program


def explore(source, stdin="", argv=None, workspace=None, memory_model="concretizing", hooks=(), subscribers=(), **config):
    """Assemble (if needed), load and fully explore a MiniVM program."""
    image = assemble(source) if isinstance(source, str) else source
    state = load_program(image, stdin, argv, memory_model)
    engine = Engine(MiniVM(image), EngineConfig(**config), workspace)
    for loc, cb in hooks:
        engine.register_hook(loc, cb)
    for kind, cb in subscribers:
        engine.subscribe(kind, cb)
    return engine.run([state])


def trace_addresses(ws, test_id):
    return [int(line, 16) for line in ws.read(test_id, "trace").split()]


class ToyContext(Context):
    """Context for :class:`ToyPlatform`: a list of step functions."""

    def __init__(self, script):
        super().__init__()
        self.script = script
        self.step = 0
        self.values = []

    def clone(self):
        c = ToyContext(self.script)
        c.pending = dict(self.pending)
        c.step = self.step
        c.values = list(self.values)
        return c


class ToyPlatform:
    """Backend whose instructions are Python callables ``f(state)``."""

    name = "toy"

    def location(self, state):
        return state.context.step

    def execute(self, state):
        ctx = state.context
        if ctx.step >= len(ctx.script):
            raise Terminate(Exit(0))
        ctx.script[ctx.step](state)
        ctx.step += 1

    def format_trace(self, trace):
        return "".join(f"{loc}\n" for loc in trace)

    def testcase_files(self, state, model):
        return {"values": "".join(f"{v}\n" for v in state.context.values)}


def toy_state(script, *symbols):
    """Fresh toy state plus one 8-bit input per name in ``symbols``."""
    st = State(ToyContext(script), platform="toy")
    variables = [st.new_symbolic_value(8, name) for name in symbols]
    return st, variables


def concretize_step(expr_of, policy=None):
    """Step that concretizes ``expr_of(state)`` and records the value."""

    def step(state):
        state.context.values.append(state.context.concretize(expr_of(state), policy))

    return step
