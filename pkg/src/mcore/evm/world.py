"""Accounts, balances, storage and recorded hash pairs."""

from __future__ import annotations

from typing import Dict, List, Optional, Tuple, Union

from mcore.smt import expression as E

ADDRESS_MASK = (1 << 160) - 1
# externally owned account that sends every transaction
DEFAULT_CALLER = 0x00000000000000000000000000000000C0FFEE00
CALLER_BALANCE = 1 << 255

Word = Union[int, E.Expression]


def word(v: Word) -> E.Expression:
    return E.bv(v, 256) if isinstance(v, int) else v


def empty_storage() -> E.Expression:
    return E.ConstArray(256, 256)


class Account:
    __slots__ = ("address", "balance", "code", "storage", "nonce")

    def __init__(self, address: int, balance: Word = 0, code: bytes = b"", storage=None, nonce: int = 0):
        self.address = address
        self.balance = word(balance)
        self.code = bytes(code)
        self.storage = storage if storage is not None else empty_storage()
        self.nonce = nonce

    def copy(self) -> "Account":
        return Account(self.address, self.balance, self.code, self.storage, self.nonce)

    def key(self) -> tuple:
        return (self.address, self.balance, self.code, self.storage, self.nonce)

    def __eq__(self, other):
        return isinstance(other, Account) and self.key() == other.key()

    __hash__ = None

    def __repr__(self):
        return f"<Account {self.address:#x} code={len(self.code)}B>"


class World:
    def __init__(self):
        self.accounts: Dict[int, Account] = {}
        self.sha3_pairs: List[Tuple[bytes, bytes]] = []
        self.tx_count = 0
        self.next_address = 1

    def clone(self) -> "World":
        w = World.__new__(World)
        w.accounts = {a: acct.copy() for a, acct in self.accounts.items()}
        w.sha3_pairs = list(self.sha3_pairs)
        w.tx_count = self.tx_count
        w.next_address = self.next_address
        return w

    def accounts_equal(self, other: "World") -> bool:
        """Bit-for-bit equality of storage, balances, nonces and code."""
        return self.accounts.keys() == other.accounts.keys() and all(
            self.accounts[a] == other.accounts[a] for a in self.accounts
        )

    def _install(self, address: Optional[int], balance: Word, code: bytes) -> int:
        if address is None:
            while self.next_address in self.accounts:
                self.next_address += 1
            address = self.next_address
            self.next_address += 1
        address &= ADDRESS_MASK
        if address in self.accounts:
            raise ValueError(f"account {address:#x} already exists")
        self.accounts[address] = Account(address, balance, code)
        return address

    def create_account(self, balance: Word = 0, address: Optional[int] = None) -> int:
        return self._install(address, balance, b"")

    def create_contract(self, code: bytes, balance: Word = 0, address: Optional[int] = None) -> int:
        return self._install(address, balance, code)

    def get(self, address: int) -> Account:
        acct = self.accounts.get(address)
        if acct is None:
            acct = self.accounts[address] = Account(address)
        return acct

    def balance_of(self, address: E.Expression) -> E.Expression:
        """Balance at a possibly symbolic address (unknown accounts hold 0)."""
        if isinstance(address, E.Constant):
            acct = self.accounts.get(address.value & ADDRESS_MASK)
            return acct.balance if acct else E.bv(0, 256)
        addr = address & ADDRESS_MASK
        out = E.bv(0, 256)
        for a in sorted(self.accounts, reverse=True):
            out = E.ite(addr.eq(a), self.accounts[a].balance, out)
        return out

    def total_balance(self) -> E.Expression:
        total = E.bv(0, 256)
        for a in sorted(self.accounts):
            total = total + self.accounts[a].balance
        return total

    def record_sha3(self, preimage: bytes, digest: bytes) -> None:
        pair = (bytes(preimage), bytes(digest))
        if pair not in self.sha3_pairs:
            self.sha3_pairs.append(pair)
