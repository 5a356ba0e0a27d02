from sqlalchemy import (
    Boolean,
    Column,
    DateTime,
    Float,
    ForeignKey,
    Integer,
    String,
    create_engine,
    func,
)
from sqlalchemy.orm import declarative_base, relationship, sessionmaker

Base = declarative_base()


class VerificationRun(Base):
    __tablename__ = "verification_runs"
    id = Column(Integer, primary_key=True)
    created = Column(DateTime, default=func.now())
    seed = Column(String)
    d = Column(Integer)
    d_state = Column(Integer)
    H = Column(Integer)
    W = Column(Integer)
    scan_order = Column(String)
    tol = Column(Float)
    passed = Column(Boolean, default=False)
    checks = relationship(
        "CheckRecord", back_populates="run", cascade="all, delete, delete-orphan"
    )

    def __repr__(self):
        return f"<VerificationRun id={self.id}, seed={self.seed}, passed={self.passed}>"


class CheckRecord(Base):
    __tablename__ = "check_records"
    id = Column(Integer, primary_key=True)
    run_id = Column(Integer, ForeignKey("verification_runs.id"))
    name = Column(String)
    passed = Column(Boolean)
    measured = Column(Float)
    limit = Column(Float)
    run = relationship("VerificationRun", back_populates="checks")

    def __repr__(self):
        return f"<CheckRecord name='{self.name}', passed={self.passed}, measured={self.measured}>"


class ComplexityRecord(Base):
    __tablename__ = "complexity_records"
    id = Column(Integer, primary_key=True)
    created = Column(DateTime, default=func.now())
    method = Column(String)
    d = Column(Integer)
    d_state = Column(Integer)
    H = Column(Integer)
    W = Column(Integer)
    params = Column(Integer)
    flops = Column(Integer)

    def __repr__(self):
        return f"<ComplexityRecord method='{self.method}', params={self.params}, flops={self.flops}>"


def open_ledger(path, tables):
    """Session on the sqlite ledger at ``path`` with ``tables`` created."""
    engine = create_engine(f"sqlite:///{path}")
    Base.metadata.create_all(engine, tables=[t.__table__ for t in tables])
    return sessionmaker(bind=engine)()
