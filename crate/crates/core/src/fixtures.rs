//! Hand-encoded persons and infons used by tests, the CLI docs and the
//! acceptance suite.

use crate::infon::{
    ArgSlot, Descriptor, Identifier, Infon, Nature, ObjectRef, Parameter, Polarity, PropertyTriple, Scalar,
};

/// An identifier with a name descriptor and a date-of-birth descriptor.
pub fn person(key: &str, dob: &str) -> Identifier {
    Identifier::new(
        key,
        [
            Descriptor::new("name", Scalar::text(key), Nature::Artificial).unwrap(),
            Descriptor::new("dob", Scalar::text(dob), Nature::Artificial).unwrap(),
        ],
    )
    .unwrap()
}

pub fn john() -> Identifier {
    person("John", "1970-01-01")
}

pub fn mary() -> Identifier {
    person("Mary", "1972-02-02")
}

pub fn alice() -> Identifier {
    person("Alice", "1980-03-03")
}

pub fn person_obj(id: &Identifier) -> ObjectRef {
    ObjectRef::person(id.clone())
}

pub fn obj(id: &str) -> ObjectRef {
    ObjectRef::nonperson(id, id)
}

pub fn pslot(id: &Identifier) -> ArgSlot {
    ArgSlot::Object(person_obj(id))
}

pub fn oslot(id: &str) -> ArgSlot {
    ArgSlot::Object(obj(id))
}

pub fn lit(text: &str) -> ArgSlot {
    ArgSlot::Literal(Scalar::text(text))
}

pub fn someone(name: &str) -> ArgSlot {
    ArgSlot::Parameter(Parameter::person(name))
}

pub fn pred(relation: &str, args: Vec<ArgSlot>) -> Infon {
    Infon::new(relation, args, Polarity::Holds).unwrap()
}

/// "Someone loves apples"
pub fn someone_loves_apples() -> Infon {
    pred("loves", vec![someone("someone"), lit("apples")])
}

/// "John loves apples", built as `Someone loves apples` anchored to John.
pub fn john_loves_apples() -> Infon {
    someone_loves_apples().anchor("someone", &person_obj(&john())).unwrap()
}

/// "John and Mary are in love"
pub fn john_and_mary_in_love() -> Infon {
    pred("in-love", vec![pslot(&john()), pslot(&mary())])
}

/// "John loves Mary"
pub fn john_loves_mary() -> Infon {
    pred("loves", vec![pslot(&john()), pslot(&mary())])
}

/// "John's car is fast": the car is the subject, John its possessor.
pub fn johns_car_is_fast() -> Infon {
    pred("is-fast", vec![oslot("car"), pslot(&john())])
}

/// "Alice visited clinic Y"
pub fn alice_visited_clinic() -> Infon {
    pred("visited", vec![pslot(&alice()), oslot("clinic-y")])
}

/// "The clinic is an abortion clinic", tagged sensitive.
pub fn clinic_is_abortion_clinic() -> Infon {
    pred("is-abortion-clinic", vec![oslot("clinic-y")])
        .with_property(PropertyTriple::valid("sensitivity", Scalar::text("sensitive")))
        .unwrap()
}

/// "The clinic opened in 1990"
pub fn clinic_opened_1990() -> Infon {
    pred("opened-in", vec![oslot("clinic-y"), ArgSlot::Literal(Scalar::number(1990))])
}

pub fn father() -> Identifier {
    person("Father", "1960-04-04")
}

pub fn mother() -> Identifier {
    person("Mother", "1962-05-05")
}

pub fn child() -> Identifier {
    person("Child", "2001-06-06")
}

/// T4 = Case(No., Father ID, Mother ID, Child ID)
pub fn case_record() -> Infon {
    pred(
        "case",
        vec![ArgSlot::Literal(Scalar::number(17)), pslot(&father()), pslot(&mother()), pslot(&child())],
    )
}

pub fn customer() -> Identifier {
    person("Customer", "1975-07-07")
}

/// Self atoms of one Customer row: Civil ID and Name are aspects of the
/// customer; Address and Product ID relate the customer to other objects.
pub fn customer_row() -> Vec<Infon> {
    vec![
        pred("civil-id", vec![pslot(&customer()), lit("CID-4410")]),
        pred("name", vec![pslot(&customer()), lit("C. Customer")]),
        pred("lives-at", vec![pslot(&customer()), oslot("address-a")]),
        pred("bought", vec![pslot(&customer()), oslot("product-x")]),
    ]
}

/// "Product X costs 100"
pub fn product_price() -> Infon {
    pred("price", vec![oslot("product-x"), ArgSlot::Literal(Scalar::number(100))])
}

/// "Product X is made by Factory F"
pub fn product_made_by() -> Infon {
    pred("made-by", vec![oslot("product-x"), oslot("factory-f")])
}

/// "Factory F holds 500 units in stock"
pub fn factory_inventory() -> Infon {
    pred("inventory", vec![oslot("factory-f"), ArgSlot::Literal(Scalar::number(500))])
}
