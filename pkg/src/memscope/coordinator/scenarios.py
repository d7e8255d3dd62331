import enum
from dataclasses import dataclass

from ..errors import MemscopeError


class Role(str, enum.Enum):
    MAIN = "Main"
    STRESS = "Stress"
    IDLE = "Idle"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class ScenarioAssignment:
    index: int
    cores: tuple
    roles: tuple

    def role_of(self, core):
        return self.roles[self.cores.index(core)]

    def cores_with(self, role):
        return [c for c, r in zip(self.cores, self.roles) if r is role]

    @property
    def main_core(self):
        return self.cores_with(Role.MAIN)[0]

    @property
    def stressors(self):
        return self.cores_with(Role.STRESS)


def build_scenarios(cores, observed=0):
    """The stress ladder: scenario ``s`` has ``s`` stressors, for s = 0..p-1.

    ``cores`` is either the online core count ``p`` (cores ``0..p-1``) or an
    explicit list of online core ids. Stressors fill the non-observed cores
    in ascending id order; the rest stay idle.
    """
    if isinstance(cores, int):
        if cores < 1:
            raise MemscopeError(f"need at least one online core, got {cores}")
        cores = range(cores)
    cores = tuple(sorted(cores))
    if not cores:
        raise MemscopeError("need at least one online core")
    if observed not in cores:
        raise MemscopeError(f"observed core {observed} is not online (online: {list(cores)})")
    others = [c for c in cores if c != observed]
    out = []
    for s in range(len(cores)):
        stress = set(others[:s])
        roles = tuple(
            Role.MAIN if c == observed else Role.STRESS if c in stress else Role.IDLE
            for c in cores
        )
        out.append(ScenarioAssignment(s, cores, roles))
    return out
